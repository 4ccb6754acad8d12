#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "eegx/masking.hpp"
#include "testutil.hpp"

using namespace eegx;

TEST_CASE("forced single block when ratio*n equals the block length") {
  auto plan = make_mask(4, 10, real(0.5), 5, 123);
  for (int c = 0; c < 4; ++c) {
    int runs = 0, masked = 0;
    bool prev = false;
    for (int i = 0; i < 10; ++i) {
      const bool m = plan.is_masked(c, i);
      masked += m;
      if (m && !prev) ++runs;
      prev = m;
    }
    CHECK(masked == 5);
    CHECK(runs == 1);
  }
}

TEST_CASE("same seed reproduces the plan") {
  auto a = make_mask(3, 17, real(0.4), 3, 777);
  auto b = make_mask(3, 17, real(0.4), 3, 777);
  CHECK(a.masked == b.masked);
  auto c = make_mask(3, 17, real(0.4), 3, 778);
  CHECK(a.masked != c.masked);
}

TEST_CASE("masked fraction concentrates around the ratio") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto plan = make_mask(1, 10000, real(0.5), 25, seed);
    const real frac = static_cast<real>(plan.masked_count()) / real(10000);
    CHECK(frac >= real(0.49));
    CHECK(frac <= real(0.51));
  }
}

TEST_CASE("masked and visible rows partition the grid") {
  auto plan = make_mask(5, 13, real(0.3), 2, 42);
  auto m = plan.masked_rows();
  auto v = plan.visible_rows();
  CHECK(m.size() + v.size() == 65);
  std::vector<char> seen(65, 0);
  for (int r : m) seen[static_cast<std::size_t>(r)] += 1;
  for (int r : v) seen[static_cast<std::size_t>(r)] += 1;
  for (char s : seen) CHECK(s == 1);
}

TEST_CASE("at least one token per channel stays visible") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto plan = make_mask(4, 7, real(0.8), 3, seed);
    for (int c = 0; c < 4; ++c) {
      int visible = 0;
      for (int i = 0; i < 7; ++i) visible += plan.is_masked(c, i) ? 0 : 1;
      CHECK(visible >= 1);
    }
  }
}

TEST_CASE("degenerate ratios are rejected") {
  CHECK_THROWS_AS(make_mask(2, 10, real(0.04), 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_mask(2, 10, real(0.98), 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_mask(2, 10, real(0.5), 11, 0), std::invalid_argument);
}

TEST_CASE("apply_mask replaces masked rows bit-for-bit and nothing else") {
  std::mt19937_64 rng(5);
  Tensor emb = testutil::random_leaf({12, 6}, rng);
  Tensor tok = Tensor::leaf({6}, {9, 8, 7, 6, 5, 4});
  auto plan = make_mask(3, 4, real(0.5), 2, 11);
  Tensor out = apply_mask(emb, plan, tok);
  for (int r = 0; r < 12; ++r)
    for (int j = 0; j < 6; ++j) {
      const real got = out.data()[static_cast<std::size_t>(r) * 6 + static_cast<std::size_t>(j)];
      if (plan.masked[static_cast<std::size_t>(r)])
        CHECK(got == tok.data()[static_cast<std::size_t>(j)]);
      else
        CHECK(got == emb.data()[static_cast<std::size_t>(r) * 6 + static_cast<std::size_t>(j)]);
    }
}

TEST_CASE("an empty plan passes embeddings through unchanged") {
  std::mt19937_64 rng(6);
  Tensor emb = testutil::random_leaf({8, 4}, rng);
  Tensor tok = Tensor::leaf({4}, {1, 1, 1, 1});
  MaskPlan plan;
  plan.channels = 2;
  plan.tokens_per_channel = 4;
  plan.masked.assign(8, 0);
  Tensor out = apply_mask(emb, plan, tok);
  CHECK(out.data() == emb.data());
}

TEST_CASE("all-but-one masked leaves one original row per channel") {
  auto plan = make_mask(3, 10, real(0.9), 3, 2);
  for (int c = 0; c < 3; ++c) {
    int visible = 0;
    for (int i = 0; i < 10; ++i) visible += plan.is_masked(c, i) ? 0 : 1;
    CHECK(visible == 1);
  }
}

TEST_CASE("visible rows recover the original batch") {
  std::mt19937_64 rng(9);
  Tensor emb = testutil::random_leaf({20, 5}, rng);
  Tensor tok = testutil::random_leaf({5}, rng);
  auto plan = make_mask(4, 5, real(0.4), 2, 3);
  Tensor out = apply_mask(emb, plan, tok);
  for (int r : plan.visible_rows())
    for (int j = 0; j < 5; ++j)
      CHECK(out.data()[static_cast<std::size_t>(r) * 5 + static_cast<std::size_t>(j)] ==
            emb.data()[static_cast<std::size_t>(r) * 5 + static_cast<std::size_t>(j)]);
}
