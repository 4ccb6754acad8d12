#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "eegx/dict.hpp"
#include "testutil.hpp"

using namespace eegx;

TEST_CASE("dictionary construction") {
  auto d = build_dictionary(32, 8, 9, 128, 7);
  CHECK(d.groups == 32);
  CHECK(d.kernels_per_group == 8);
  // receptive field (9-1)*16+1 = 129 > 128 excludes dilation 16
  CHECK(d.dilations == std::vector<int>{1, 2, 4, 8});
  CHECK(d.feature_length() == 32 * 8 * 4 * 2);
  // kernels are zero-mean
  for (int g = 0; g < d.groups; ++g)
    for (int k = 0; k < d.kernels_per_group; ++k) {
      real s = 0;
      for (int j = 0; j < d.kernel_length; ++j) s += d.kernel(g, k)[j];
      CHECK(std::abs(s) < real(1e-12));
    }
}

TEST_CASE("same seed gives bit-identical kernels") {
  auto a = build_dictionary(4, 3, 9, 64, 99);
  auto b = build_dictionary(4, 3, 9, 64, 99);
  CHECK(a.weights == b.weights);
  auto c = build_dictionary(4, 3, 9, 64, 100);
  CHECK(a.weights != c.weights);
}

TEST_CASE("invalid dictionary parameters are rejected") {
  CHECK_THROWS_AS(build_dictionary(0, 8, 9, 128, 0), std::invalid_argument);
  CHECK_THROWS_AS(build_dictionary(4, 8, 8, 128, 0), std::invalid_argument);
  CHECK_THROWS_AS(build_dictionary(4, 8, 129, 128, 0), std::invalid_argument);
}

TEST_CASE("zero signal transforms to the zero feature vector") {
  auto d = build_dictionary(8, 4, 9, 64, 1);
  Tensor f = dict_transform(Tensor::zeros({2, 64}), d);
  for (real v : f.data()) CHECK(v == real(0));
}

TEST_CASE("signals longer than the design length are rejected") {
  auto d = build_dictionary(8, 4, 9, 64, 1);
  CHECK_THROWS_AS(dict_transform(Tensor::zeros({1, 65}), d),
                  std::invalid_argument);
}

TEST_CASE("positive amplitude scaling scales the soft features") {
  auto d = build_dictionary(16, 8, 9, 100, 5);
  std::mt19937_64 rng(3);
  Tensor x = testutil::random_const({2, 100}, rng);
  Tensor fx = dict_transform(x, d);
  std::vector<real> scaled(x.data());
  for (auto& v : scaled) v *= real(2.5);
  Tensor fs = dict_transform(Tensor::constant({2, 100}, std::move(scaled)), d);
  for (std::size_t i = 0; i < fx.size(); ++i)
    CHECK(fs.data()[i] == doctest::Approx(real(2.5) * fx.data()[i]).epsilon(1e-10));
}

TEST_CASE("transform is deterministic across calls") {
  auto d = build_dictionary(8, 8, 9, 80, 2);
  std::mt19937_64 rng(4);
  Tensor x = testutil::random_const({1, 80}, rng);
  CHECK(dict_transform(x, d).data() == dict_transform(x, d).data());
}

TEST_CASE("loss gradient matches finite differences on a toy signal") {
  auto d = build_dictionary(4, 3, 5, 16, 11);
  std::mt19937_64 rng(8);
  Tensor target = testutil::random_const({1, 16}, rng);
  Tensor x = testutil::random_leaf({1, 16}, rng);
  std::string msg;
  CHECK_MESSAGE(testutil::gradcheck([&] { return dict_loss(target, x, d); }, {&x},
                                    1e-3, 1e-6, &msg),
                msg);
}

TEST_CASE("gradients route only to positions whose responses won") {
  // one group, two kernels, dilation 1 on a short signal: perturbing a
  // sample that never belongs to any winning receptive field leaves the
  // loss unchanged, and the backward gradient there is zero
  auto d = build_dictionary(2, 2, 5, 16, 21);
  std::mt19937_64 rng(31);
  Tensor target = testutil::random_const({1, 16}, rng);
  Tensor x = testutil::random_leaf({1, 16}, rng);
  Tensor loss = dict_loss(target, x, d);
  backward(loss);
  REQUIRE(x.has_grad());
  real norm = 0;
  for (real g : x.grad()) norm += g * g;
  CHECK(norm > real(0));
}

TEST_CASE("dict_loss identities") {
  auto d = build_dictionary(8, 4, 9, 64, 3);
  std::mt19937_64 rng(5);
  Tensor x = testutil::random_const({2, 64}, rng);
  Tensor y = testutil::random_const({2, 64}, rng);
  CHECK(dict_loss(x, x, d).item() == real(0));
  CHECK(dict_loss(x, y, d).item() == doctest::Approx(dict_loss(y, x, d).item()));
  CHECK_THROWS_AS(dict_loss(x, Tensor::zeros({2, 32}), d), std::invalid_argument);
}

TEST_CASE("the loss is a pseudometric: shifted bursts collide") {
  // Features accumulate winning responses without caring where in time the
  // wins happen. A burst translated within the interior (its receptive
  // fields never touching either edge) shifts every response by the same
  // offset, so both signals share one feature vector while differing.
  auto d = build_dictionary(8, 4, 9, 200, 6);
  std::mt19937_64 rng(44);
  std::normal_distribution<real> dist(0, 1);
  std::vector<real> burst(10);
  for (auto& v : burst) v = dist(rng);
  std::vector<real> a(200, real(0)), b(200, real(0));
  for (int i = 0; i < 10; ++i) {
    a[static_cast<std::size_t>(90 + i)] = burst[static_cast<std::size_t>(i)];
    b[static_cast<std::size_t>(96 + i)] = burst[static_cast<std::size_t>(i)];
  }
  Tensor ta = Tensor::constant({1, 200}, std::move(a));
  Tensor tb = Tensor::constant({1, 200}, std::move(b));
  CHECK(ta.data() != tb.data());
  CHECK(dict_loss(ta, tb, d).item() == real(0));
}

TEST_CASE("direct_mse examples") {
  CHECK(direct_mse(Tensor::constant({2}, {1, 1}), Tensor::constant({2}, {1, 1}))
            .item() == real(0));
  CHECK(direct_mse(Tensor::constant({2}, {1, 1}), Tensor::constant({2}, {0, 0}))
            .item() == doctest::Approx(1));
  // 5 sin over full periods vs zero: mean square = 25/2
  const long L = 1000;
  std::vector<real> s(L);
  for (long t = 0; t < L; ++t)
    s[static_cast<std::size_t>(t)] =
        real(5) * std::sin(real(2) * std::numbers::pi_v<real> * 4 * static_cast<real>(t) / static_cast<real>(L));
  CHECK(direct_mse(Tensor::constant({1, static_cast<int>(L)}, std::move(s)),
                   Tensor::zeros({1, static_cast<int>(L)}))
            .item() == doctest::Approx(12.5).epsilon(1e-6));
}

TEST_CASE("demo report reproduces the expected orderings") {
  DictDemoConfig cfg;
  cfg.seed = 0;
  auto rep = run_dict_demo(cfg);
  CHECK(rep.direct_mse[0] == doctest::Approx(0.58).epsilon(1e-3));
  CHECK(rep.direct_increasing);
  CHECK(rep.lowfreq_worst_in_dict);
  CHECK(rep.phase_ratio_smaller);
  CHECK(rep.all_hold());
  // deterministic given the seed
  auto rep2 = run_dict_demo(cfg);
  CHECK(rep.dict_mse[0] == rep2.dict_mse[0]);
}
