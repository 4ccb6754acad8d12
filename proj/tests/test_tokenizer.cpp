#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "eegx/atlas.hpp"
#include "eegx/dsp.hpp"
#include "eegx/tokenizer.hpp"
#include "testutil.hpp"

using namespace eegx;

namespace {

RawRecording make_recording(std::vector<std::string> names, long L, real fs,
                            const std::function<real(int, long)>& f) {
  RawRecording rec;
  rec.channel_names = std::move(names);
  rec.length = L;
  rec.sample_rate = fs;
  rec.samples.resize(static_cast<std::size_t>(rec.channels()) * static_cast<std::size_t>(L));
  for (int c = 0; c < rec.channels(); ++c)
    for (long t = 0; t < L; ++t) rec.channel(c)[t] = f(c, t);
  return rec;
}

// oracle: emit window starts while each window still contributes at least
// one unseen sample
std::vector<long> oracle_starts(long L, int w, int o) {
  std::vector<long> starts{0};
  long s = w - o;
  while (s < L - o) {
    starts.push_back(s);
    s += w - o;
  }
  return starts;
}

}  // namespace

TEST_CASE("single window covers the whole signal") {
  auto rec = make_recording({"Cz"}, 128, 128, [](int, long t) {
    return static_cast<real>(t);
  });
  Tensor toks = segment(rec, 128, 32);
  REQUIRE(toks.shape() == Shape{1, 128});
  for (long t = 0; t < 128; ++t)
    CHECK(toks.data()[static_cast<std::size_t>(t)] == doctest::Approx(static_cast<double>(t)));
}

TEST_CASE("three windows with zero-padded tail") {
  auto rec = make_recording({"Cz"}, 256, 128, [](int, long t) {
    return static_cast<real>(t + 1);
  });
  REQUIRE(token_count(256, 128, 32) == 3);
  Tensor toks = segment(rec, 128, 32);
  REQUIRE(toks.shape() == Shape{3, 128});
  // starts 0, 96, 192; third token runs past the signal by 64 samples
  CHECK(toks.data()[0] == doctest::Approx(1));
  CHECK(toks.data()[128] == doctest::Approx(97));
  CHECK(toks.data()[256] == doctest::Approx(193));
  for (int t = 64; t < 128; ++t)
    CHECK(toks.data()[static_cast<std::size_t>(2 * 128 + t)] == doctest::Approx(0));
}

TEST_CASE("default configuration uses a 128-sample window with overlap 32") {
  TokenizerConfig cfg;
  CHECK(cfg.window == 128);
  CHECK(cfg.overlap == 32);
}

TEST_CASE("overlap must be smaller than the window") {
  auto rec = make_recording({"Cz"}, 64, 128, [](int, long) { return real(0); });
  CHECK_THROWS_AS(segment(rec, 32, 32), std::invalid_argument);
  CHECK_THROWS_AS(segment(rec, 32, 40), std::invalid_argument);
}

TEST_CASE("token counts match the windowing oracle over a parameter grid") {
  for (long L : {1L, 5L, 31L, 32L, 33L, 64L, 100L, 128L, 129L, 256L, 300L, 1000L}) {
    for (int w : {8, 16, 32, 128}) {
      for (int o : {0, 2, 7, 31, 96}) {
        if (o >= w) continue;
        const auto starts = oracle_starts(L, w, o);
        CHECK(token_count(L, w, o) == static_cast<int>(starts.size()));
      }
    }
  }
}

TEST_CASE("consecutive tokens share exactly the overlap region") {
  auto rec = make_recording({"Cz"}, 300, 128, [](int, long t) {
    return std::sin(real(0.05) * static_cast<real>(t));
  });
  const int w = 64, o = 16;
  Tensor toks = segment(rec, w, o);
  const int n = token_count(300, w, o);
  for (int i = 0; i + 1 < n; ++i) {
    const long next_start = static_cast<long>(i + 1) * (w - o);
    if (next_start + w > 300) continue;  // padded tail excluded
    for (int j = 0; j < o; ++j) {
      const real a = toks.data()[static_cast<std::size_t>(i) * w + static_cast<std::size_t>(w - o + j)];
      const real b = toks.data()[static_cast<std::size_t>(i + 1) * w + static_cast<std::size_t>(j)];
      CHECK(a == b);
    }
  }
}

TEST_CASE("zero token embeds to exactly the bias") {
  std::mt19937_64 rng(5);
  Tensor W = testutil::random_leaf({9, 6}, rng);
  Tensor b = Tensor::leaf({6}, {1, 2, 3, 4, 5, 6});
  Tensor mags = token_magnitudes(Tensor::zeros({2, 16}), true);
  Tensor e = stft_embed(mags, W, b);
  for (int r = 0; r < 2; ++r)
    for (int j = 0; j < 6; ++j)
      CHECK(e.data()[static_cast<std::size_t>(r) * 6 + static_cast<std::size_t>(j)] ==
            doctest::Approx(static_cast<double>(j + 1)));
}

TEST_CASE("fft magnitudes match a direct transform oracle") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> dist(0, 1);
  std::vector<real> x(64);
  for (auto& v : x) v = static_cast<real>(dist(rng));
  const auto fast = frame_magnitude(x.data(), 64, true);
  // direct windowed transform
  std::vector<real> windowed(x);
  for (int i = 0; i < 64; ++i)
    windowed[static_cast<std::size_t>(i)] *=
        real(0.5) * (real(1) - std::cos(real(2) * std::numbers::pi_v<real> * i / real(64)));
  for (int k = 0; k <= 32; ++k) {
    double re = 0, im = 0;
    for (int t = 0; t < 64; ++t) {
      const double ang = -2.0 * std::numbers::pi * k * t / 64.0;
      re += windowed[static_cast<std::size_t>(t)] * std::cos(ang);
      im += windowed[static_cast<std::size_t>(t)] * std::sin(ang);
    }
    CHECK(fast[static_cast<std::size_t>(k)] ==
          doctest::Approx(std::sqrt(re * re + im * im)).epsilon(1e-9));
  }
}

TEST_CASE("a bin-centered sinusoid concentrates in its bin") {
  const int w = 64;
  std::vector<real> x(w);
  for (int t = 0; t < w; ++t)
    x[static_cast<std::size_t>(t)] =
        std::sin(real(2) * std::numbers::pi_v<real> * real(8) * t / real(w));
  const auto mag = frame_magnitude(x.data(), w, true);
  std::size_t best = 0;
  for (std::size_t k = 1; k < mag.size(); ++k)
    if (mag[k] > mag[best]) best = k;
  CHECK(best == 8);
  // dominant over everything except the Hann side bins
  for (std::size_t k = 0; k < mag.size(); ++k)
    if (k < 7 || k > 9) CHECK(mag[8] > real(4) * mag[k]);
}

TEST_CASE("global sign flip leaves embeddings unchanged") {
  auto rec = make_recording({"Cz", "Pz"}, 128, 128, [](int c, long t) {
    return std::sin(real(0.21) * static_cast<real>(t + c));
  });
  auto flipped = rec;
  for (auto& v : flipped.samples) v = -v;
  std::mt19937_64 rng(2);
  Tensor W = testutil::random_leaf({65, 8}, rng);
  Tensor b = testutil::random_leaf({8}, rng);
  TokenizerConfig cfg;
  cfg.window = 128;
  cfg.overlap = 32;
  auto a = tokenize(rec, cfg, W, b, nullptr);
  auto bb = tokenize(flipped, cfg, W, b, nullptr);
  for (std::size_t i = 0; i < a.embeddings.size(); ++i)
    CHECK(a.embeddings.data()[i] ==
          doctest::Approx(bb.embeddings.data()[i]).epsilon(1e-12));
}

TEST_CASE("embedding gradients match finite differences") {
  std::mt19937_64 rng(8);
  Tensor W = testutil::random_leaf({9, 4}, rng);
  Tensor b = testutil::random_leaf({4}, rng);
  auto rec = make_recording({"Cz"}, 40, 128, [](int, long t) {
    return std::cos(real(0.3) * static_cast<real>(t));
  });
  Tensor mags = token_magnitudes(segment(rec, 16, 4), true);
  std::string msg;
  CHECK_MESSAGE(testutil::gradcheck(
                    [&] { return squared_l2(stft_embed(mags, W, b)); }, {&W, &b},
                    1e-4, 1e-5, &msg),
                msg);
}

TEST_CASE("spectrum width must match the embedding weights") {
  Tensor W = Tensor::zeros({9, 4});
  Tensor b = Tensor::zeros({4});
  Tensor mags = token_magnitudes(Tensor::zeros({1, 32}), true);  // 17 bins
  CHECK_THROWS_WITH_AS(stft_embed(mags, W, b), doctest::Contains("incompatible"),
                       std::invalid_argument);
}

TEST_CASE("zero signal tokenizes to bias plus location encoding") {
  Atlas atlas = Atlas::bundled();
  auto rec = make_recording({"Oz"}, 128, 128, [](int, long) { return real(0); });
  std::mt19937_64 rng(4);
  Tensor W = testutil::random_leaf({65, 16}, rng);
  Tensor b = testutil::random_leaf({16}, rng);
  Tensor ce = channel_location_encodings(rec, atlas, 16);
  TokenizerConfig cfg;
  auto batch = tokenize(rec, cfg, W, b, &ce);
  const auto& oz = atlas.lookup("Oz");
  const auto loc = location_encoding(atlas.scaled_u(oz), atlas.scaled_v(oz), 16);
  for (int j = 0; j < 16; ++j)
    CHECK(batch.embeddings.data()[static_cast<std::size_t>(j)] ==
          doctest::Approx(b.data()[static_cast<std::size_t>(j)] + loc[static_cast<std::size_t>(j)]));
}

TEST_CASE("channel permutation permutes the token batch identically") {
  Atlas atlas = Atlas::bundled();
  auto rec = make_recording({"O1", "O2", "Cz"}, 200, 128, [](int c, long t) {
    return std::sin(real(0.1) * static_cast<real>(t) + c);
  });
  auto permuted = make_recording({"Cz", "O1", "O2"}, 200, 128, [&](int c, long t) {
    const int src[3] = {2, 0, 1};
    return rec.channel(src[c])[t];
  });
  std::mt19937_64 rng(6);
  Tensor W = testutil::random_leaf({33, 8}, rng);
  Tensor b = testutil::random_leaf({8}, rng);
  TokenizerConfig cfg;
  cfg.window = 64;
  cfg.overlap = 16;
  Tensor ce1 = channel_location_encodings(rec, atlas, 8);
  Tensor ce2 = channel_location_encodings(permuted, atlas, 8);
  auto b1 = tokenize(rec, cfg, W, b, &ce1);
  auto b2 = tokenize(permuted, cfg, W, b, &ce2);
  const int n = b1.tokens_per_channel, d = 8;
  const int map_new_to_old[3] = {2, 0, 1};
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j)
        CHECK(b2.embeddings.data()[static_cast<std::size_t>(b2.row(c, i)) * d + static_cast<std::size_t>(j)] ==
              b1.embeddings.data()[static_cast<std::size_t>(b1.row(map_new_to_old[c], i)) * d + static_cast<std::size_t>(j)]);
}

TEST_CASE("different montages tokenize with one configuration") {
  Atlas atlas = Atlas::bundled();
  std::mt19937_64 rng(10);
  Tensor W = testutil::random_leaf({65, 16}, rng);
  Tensor b = testutil::random_leaf({16}, rng);
  TokenizerConfig cfg;
  const std::vector<std::vector<std::string>> montages = {
      {"AF3", "F7", "F3", "FC5", "T7", "P7", "O1", "O2", "P8", "T8", "FC6",
       "F4", "AF4", "F8"},
      {"Fp1", "Fp2", "F3", "F4", "C3", "C4", "P3", "P4", "O1", "O2", "F7",
       "F8", "T7", "T8", "P5", "P6", "Fz", "Cz", "Pz"}};
  for (const auto& m : montages) {
    auto rec = make_recording(std::vector<std::string>(m), 256, 128,
                              [](int c, long t) { return std::sin(real(0.01) * static_cast<real>(t * (c + 1))); });
    Tensor ce = channel_location_encodings(rec, atlas, 16);
    auto batch = tokenize(rec, cfg, W, b, &ce);
    CHECK(batch.channels == static_cast<int>(m.size()));
    CHECK(batch.tokens_per_channel == 3);
    CHECK(batch.embeddings.dim(0) == static_cast<int>(m.size()) * 3);
  }
}

TEST_CASE("tokenize is deterministic") {
  Atlas atlas = Atlas::bundled();
  auto rec = make_recording({"Cz", "Pz"}, 256, 128, [](int c, long t) {
    return std::sin(real(0.02) * static_cast<real>(t + 31 * c));
  });
  std::mt19937_64 rng(12);
  Tensor W = testutil::random_leaf({65, 16}, rng);
  Tensor b = testutil::random_leaf({16}, rng);
  Tensor ce = channel_location_encodings(rec, atlas, 16);
  TokenizerConfig cfg;
  auto b1 = tokenize(rec, cfg, W, b, &ce);
  auto b2 = tokenize(rec, cfg, W, b, &ce);
  CHECK(b1.embeddings.data() == b2.embeddings.data());
}
