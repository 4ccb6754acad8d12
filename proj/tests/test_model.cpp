#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include "eegx/atlas.hpp"
#include "eegx/checkpoint.hpp"
#include "eegx/model.hpp"
#include "eegx/tokenizer.hpp"
#include "testutil.hpp"

using namespace eegx;

namespace {

ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.d_e = 8;
  cfg.heads = 2;
  cfg.student_layers = 2;
  cfg.predictor_layers = 1;
  cfg.decoder_layers = 1;
  cfg.ffn_mult = 2;
  cfg.dropout = 0;
  cfg.window = 8;
  cfg.overlap = 2;
  return cfg;
}

Tensor random_embeddings(int rows, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return testutil::random_const({rows, d}, rng, 0.5);
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig cfg = toy_config();
  cfg.d_e = 10;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = toy_config();
  cfg.heads = 3;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = toy_config();
  cfg.ce = ChannelEmbeddingKind::learned;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("encoder output keeps the sequence shape and is deterministic") {
  auto state = init_model(toy_config(), 1);
  Tensor emb = random_embeddings(6, 8, 2);
  Forward eval{};
  Tensor a = encode_student(state, emb, 2, 3, eval);
  REQUIRE(a.shape() == Shape{6, 8});
  Tensor b = encode_student(state, emb, 2, 3, eval);
  CHECK(a.data() == b.data());
}

TEST_CASE("teacher equals student right after initialization") {
  auto state = init_model(toy_config(), 3);
  Tensor emb = random_embeddings(6, 8, 4);
  Forward eval{};
  Tensor s = encode_student(state, emb, 2, 3, eval);
  Tensor t = encode_teacher(state, emb, 2, 3);
  for (std::size_t i = 0; i < s.size(); ++i)
    CHECK(s.data()[i] == doctest::Approx(t.data()[i]).epsilon(1e-12));
}

TEST_CASE("gradients never reach teacher parameters") {
  auto state = init_model(toy_config(), 5);
  Tensor emb = random_embeddings(6, 8, 6);
  Forward eval{};
  Tensor t = encode_teacher(state, emb, 2, 3);
  CHECK_FALSE(t.on_tape());
  Tensor s = encode_student(state, emb, 2, 3, eval);
  backward(squared_l2(sub(s, t)));
  for (const auto& [name, shadow] : state.teacher) CHECK_FALSE(shadow.on_tape());
  CHECK(state.param("student.l0.attn.Wq").has_grad());
}

TEST_CASE("ema update follows the convex combination") {
  auto state = init_model(toy_config(), 7);
  // drive one student parameter to a known value
  auto& w = state.param("student.l0.attn.Wq").mutable_data();
  std::fill(w.begin(), w.end(), real(1));
  auto& shadow = state.teacher.at("student.l0.attn.Wq");
  std::fill(shadow.mutable_data().begin(), shadow.mutable_data().end(), real(0));

  SUBCASE("tau = 1 keeps the teacher") {
    ema_update(state, 1);
    CHECK(shadow.data()[0] == real(0));
  }
  SUBCASE("tau = 0 copies the student") {
    ema_update(state, 0);
    CHECK(shadow.data()[0] == real(1));
  }
  SUBCASE("tau = 0.999 moves a thousandth") {
    ema_update(state, real(0.999));
    CHECK(shadow.data()[0] == doctest::Approx(0.001).epsilon(1e-9));
  }
  SUBCASE("closed form after repeated updates") {
    const real tau = real(0.97);
    for (int i = 0; i < 25; ++i) ema_update(state, tau);
    const real expected = (real(1) - std::pow(tau, real(25)));  // q=0, p=1
    CHECK(shadow.data()[0] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("predictor output count matches the masked set") {
  auto state = init_model(toy_config(), 9);
  MaskPlan plan;
  plan.channels = 2;
  plan.tokens_per_channel = 3;
  plan.masked = {1, 0, 0, 0, 1, 1};
  Tensor latents = random_embeddings(6, 8, 10);
  Tensor queries = predictor_queries(state, plan, std::nullopt);
  Forward eval{};
  Tensor out = predict_masked(state, latents, plan, queries, eval);
  CHECK(out.shape() == Shape{3, 8});
}

TEST_CASE("predictor is invariant to permuting key/value rows") {
  auto state = init_model(toy_config(), 11);
  MaskPlan plan;
  plan.channels = 2;
  plan.tokens_per_channel = 3;
  plan.masked = {0, 1, 0, 0, 0, 1};
  Tensor latents = random_embeddings(6, 8, 12);
  // permuted copy of the latent rows
  std::vector<real> perm_data(latents.size());
  const int permuted[6] = {4, 2, 0, 5, 1, 3};
  for (int r = 0; r < 6; ++r)
    for (int j = 0; j < 8; ++j)
      perm_data[static_cast<std::size_t>(r) * 8 + static_cast<std::size_t>(j)] =
          latents.data()[static_cast<std::size_t>(permuted[r]) * 8 + static_cast<std::size_t>(j)];
  Tensor latents_perm = Tensor::constant({6, 8}, std::move(perm_data));
  Tensor queries = predictor_queries(state, plan, std::nullopt);
  Forward eval{};
  Tensor a = predict_masked(state, latents, plan, queries, eval);
  Tensor b = predict_masked(state, latents_perm, plan, queries, eval);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-10));
}

TEST_CASE("empty mask set is rejected") {
  auto state = init_model(toy_config(), 13);
  MaskPlan plan;
  plan.channels = 1;
  plan.tokens_per_channel = 3;
  plan.masked = {0, 0, 0};
  CHECK_THROWS_AS(predictor_queries(state, plan, std::nullopt),
                  std::invalid_argument);
}

TEST_CASE("decoder reconstructs the recording shape") {
  auto cfg = toy_config();
  auto state = init_model(cfg, 15);
  MaskPlan plan;
  plan.channels = 2;
  plan.tokens_per_channel = 3;
  plan.masked = {1, 0, 0, 0, 1, 0};
  const long L = 20;  // 3 tokens of 8 with overlap 2 cover exactly 20
  Tensor latents = random_embeddings(6, 8, 16);
  Tensor pred = random_embeddings(2, 8, 17);
  Forward eval{};
  Tensor x = decode(state, pred, latents, plan, L, eval);
  CHECK(x.shape() == Shape{2, 20});

  // single-token grid: the deconvolution output becomes a single window
  MaskPlan one;
  one.channels = 1;
  one.tokens_per_channel = 1;
  one.masked = {1};
  Tensor lat1 = random_embeddings(1, 8, 18);
  Tensor pred1 = random_embeddings(1, 8, 19);
  Tensor y = decode(state, pred1, lat1, one, 8, eval);
  CHECK(y.shape() == Shape{1, 8});
}

TEST_CASE("full pipeline routes gradients into every trainable family") {
  auto cfg = toy_config();
  auto state = init_model(cfg, 21);
  Atlas atlas = Atlas::bundled();

  RawRecording rec;
  rec.channel_names = {"C3", "C4"};
  rec.length = 20;
  rec.sample_rate = 32;
  rec.samples.resize(40);
  std::mt19937_64 rng(22);
  std::normal_distribution<real> dist(0, 1);
  for (auto& v : rec.samples) v = dist(rng);

  TokenizerConfig tok;
  tok.window = cfg.window;
  tok.overlap = cfg.overlap;
  auto ce = channel_embedding_for(state, rec.channel_names, atlas);
  TokenBatch batch = tokenize(rec, tok, state.param("embed.W"),
                              state.param("embed.b"), ce ? &*ce : nullptr);
  MaskPlan plan = make_mask(batch.channels, batch.tokens_per_channel, real(0.4),
                            1, 23);
  Forward eval{};
  Tensor masked = apply_mask(batch.embeddings, plan, state.param("embed.mask_token"));
  Tensor student = encode_student(state, masked, 2, 3, eval);
  Tensor teacher = encode_teacher(state, batch.embeddings, 2, 3);
  Tensor queries = predictor_queries(state, plan, ce);
  Tensor pred = predict_masked(state, student, plan, queries, eval);
  Tensor decoded = decode(state, pred, student, plan, rec.length, eval);
  Tensor target = Tensor::constant({2, 20}, rec.samples);
  Tensor loss = add(squared_l2(sub(decoded, target)),
                    squared_l2(sub(pred, rows_select(teacher, plan.masked_rows()))));
  backward(loss);

  auto grad_norm = [&](const std::string& name) {
    const Tensor& p = state.param(name);
    if (!p.has_grad()) return real(0);
    real s = 0;
    for (real g : p.grad()) s += g * g;
    return s;
  };
  CHECK(grad_norm("embed.W") > real(0));
  CHECK(grad_norm("embed.b") > real(0));
  CHECK(grad_norm("embed.mask_token") > real(0));
  CHECK(grad_norm("student.l0.attn.Wq") > real(0));
  CHECK(grad_norm("predictor.l0.attn.Wq") > real(0));
  CHECK(grad_norm("decoder.in.W") > real(0));
  CHECK(grad_norm("decoder.deconv.W") > real(0));
}

TEST_CASE("learned channel table falls back to zeros for unknown names") {
  auto cfg = toy_config();
  cfg.ce = ChannelEmbeddingKind::learned;
  cfg.learned_ce_names = {"C3", "C4"};
  auto state = init_model(cfg, 29);
  Atlas atlas = Atlas::bundled();
  auto ce = channel_embedding_for(state, {"C3", "P7"}, atlas);
  REQUIRE(ce.has_value());
  REQUIRE(ce->shape() == Shape{2, 8});
  const auto& table = state.param("embed.ce_table");
  for (int j = 0; j < 8; ++j) {
    CHECK(ce->data()[static_cast<std::size_t>(j)] == table.data()[static_cast<std::size_t>(j)]);
    CHECK(ce->data()[static_cast<std::size_t>(8 + j)] == real(0));
  }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  auto cfg = toy_config();
  auto state = init_model(cfg, 31);
  state.step = 1234;
  const std::string path = "/tmp/eegx_test_ckpt.bin";
  save_checkpoint(path, state);
  auto loaded = load_checkpoint(path);
  CHECK(loaded.step == 1234);
  CHECK(loaded.config.d_e == cfg.d_e);
  CHECK(loaded.config.window == cfg.window);
  CHECK(loaded.params.size() == state.params.size());
  for (const auto& [name, t] : state.params) {
    REQUIRE(loaded.params.count(name) == 1);
    CHECK(loaded.params.at(name).data() == t.data());
  }
  for (const auto& [name, t] : state.teacher) {
    REQUIRE(loaded.teacher.count(name) == 1);
    CHECK(loaded.teacher.at(name).data() == t.data());
  }
  std::filesystem::remove(path);
}
