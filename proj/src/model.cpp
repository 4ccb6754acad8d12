#include "eegx/model.hpp"

#include <cmath>
#include <stdexcept>

namespace eegx {

ChannelEmbeddingKind channel_embedding_kind_from_string(const std::string& s) {
  const std::string k = lower(trim(s));
  if (k == "none") return ChannelEmbeddingKind::none;
  if (k == "learned") return ChannelEmbeddingKind::learned;
  if (k == "location") return ChannelEmbeddingKind::location;
  throw std::invalid_argument("channel embedding kind must be none|learned|location, got '" + s + "'");
}

std::string to_string(ChannelEmbeddingKind k) {
  switch (k) {
    case ChannelEmbeddingKind::none: return "none";
    case ChannelEmbeddingKind::learned: return "learned";
    case ChannelEmbeddingKind::location: return "location";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (d_e <= 0 || d_e % 4 != 0)
    throw std::invalid_argument("model: d_e must be positive and divisible by 4");
  if (heads <= 0 || d_e % heads != 0)
    throw std::invalid_argument("model: d_e must be divisible by heads");
  if (student_layers < 1 || predictor_layers < 1 || decoder_layers < 1)
    throw std::invalid_argument("model: layer counts must be >= 1");
  if (ffn_mult < 1) throw std::invalid_argument("model: ffn_mult must be >= 1");
  if (dropout < real(0) || dropout >= real(1))
    throw std::invalid_argument("model: dropout must lie in [0, 1)");
  if (window < 2 || overlap < 0 || overlap >= window)
    throw std::invalid_argument("model: window/overlap invalid");
  if (ce == ChannelEmbeddingKind::learned && learned_ce_names.empty())
    throw std::invalid_argument("model: learned channel embedding needs a channel vocabulary");
}

Tensor& ModelState::param(const std::string& name) {
  auto it = params.find(name);
  if (it == params.end())
    throw std::runtime_error("model: unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ModelState::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end())
    throw std::runtime_error("model: unknown parameter '" + name + "'");
  return it->second;
}

namespace {

Tensor init_weight(Rng& rng, Shape shape) {
  std::vector<real> d(shape_numel(shape));
  for (auto& v : d) v = truncated_normal(rng, real(0.02));
  return Tensor::leaf(std::move(shape), std::move(d));
}

Tensor init_zeros(Shape shape) {
  return Tensor::leaf(std::move(shape), std::vector<real>(shape_numel(shape), real(0)));
}

Tensor init_ones(Shape shape) {
  return Tensor::leaf(std::move(shape), std::vector<real>(shape_numel(shape), real(1)));
}

void add_block_params(std::map<std::string, Tensor>& p, const std::string& prefix,
                      int d, int ffn_mult, bool cross, Rng& rng) {
  p[prefix + ".ln1.g"] = init_ones({d});
  p[prefix + ".ln1.b"] = init_zeros({d});
  if (cross) {
    p[prefix + ".lnkv.g"] = init_ones({d});
    p[prefix + ".lnkv.b"] = init_zeros({d});
  }
  p[prefix + ".attn.Wq"] = init_weight(rng, {d, d});
  p[prefix + ".attn.bq"] = init_zeros({d});
  p[prefix + ".attn.Wk"] = init_weight(rng, {d, d});
  p[prefix + ".attn.bk"] = init_zeros({d});
  p[prefix + ".attn.Wv"] = init_weight(rng, {d, d});
  p[prefix + ".attn.bv"] = init_zeros({d});
  p[prefix + ".attn.Wo"] = init_weight(rng, {d, d});
  p[prefix + ".attn.bo"] = init_zeros({d});
  p[prefix + ".ln2.g"] = init_ones({d});
  p[prefix + ".ln2.b"] = init_zeros({d});
  p[prefix + ".ffn.W1"] = init_weight(rng, {d, d * ffn_mult});
  p[prefix + ".ffn.b1"] = init_zeros({d * ffn_mult});
  p[prefix + ".ffn.W2"] = init_weight(rng, {d * ffn_mult, d});
  p[prefix + ".ffn.b2"] = init_zeros({d});
}

Tensor dropout_t(const Tensor& x, real p, const Forward& fwd) {
  if (!fwd.train || p <= real(0)) return x;
  if (!fwd.rng)
    throw std::invalid_argument("model: training forward pass needs an rng");
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  std::vector<real> m(x.size());
  const real scale_up = real(1) / (real(1) - p);
  for (auto& v : m) v = keep(*fwd.rng) ? scale_up : real(0);
  return mul(x, Tensor::constant(x.shape(), std::move(m)));
}

struct ParamView {
  const std::map<std::string, Tensor>* map;
  const Tensor& operator()(const std::string& name) const {
    auto it = map->find(name);
    if (it == map->end())
      throw std::runtime_error("model: missing parameter '" + name + "'");
    return it->second;
  }
};

Tensor multihead_attention(const ParamView& P, const std::string& prefix,
                           const Tensor& q_in, const Tensor& kv_in, int heads,
                           real dropout, const Forward& fwd) {
  const int d = q_in.dim(1);
  const int dh = d / heads;
  Tensor q = add_rowwise(matmul(q_in, P(prefix + ".attn.Wq")), P(prefix + ".attn.bq"));
  Tensor k = add_rowwise(matmul(kv_in, P(prefix + ".attn.Wk")), P(prefix + ".attn.bk"));
  Tensor v = add_rowwise(matmul(kv_in, P(prefix + ".attn.Wv")), P(prefix + ".attn.bv"));
  std::vector<Tensor> ctx;
  ctx.reserve(static_cast<std::size_t>(heads));
  const real inv_sqrt_dh = real(1) / std::sqrt(static_cast<real>(dh));
  for (int h = 0; h < heads; ++h) {
    Tensor qh = slice(q, 1, h * dh, dh);
    Tensor kh = slice(k, 1, h * dh, dh);
    Tensor vh = slice(v, 1, h * dh, dh);
    Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dh);
    Tensor probs = softmax_rows(scores);
    probs = dropout_t(probs, dropout, fwd);
    ctx.push_back(matmul(probs, vh));
  }
  Tensor merged = concat(ctx, 1);
  Tensor out = add_rowwise(matmul(merged, P(prefix + ".attn.Wo")), P(prefix + ".attn.bo"));
  return dropout_t(out, dropout, fwd);
}

Tensor ffn_block(const ParamView& P, const std::string& prefix, const Tensor& x,
                 real dropout, const Forward& fwd) {
  Tensor h = add_rowwise(matmul(x, P(prefix + ".ffn.W1")), P(prefix + ".ffn.b1"));
  h = gelu(h);
  h = add_rowwise(matmul(h, P(prefix + ".ffn.W2")), P(prefix + ".ffn.b2"));
  return dropout_t(h, dropout, fwd);
}

Tensor encoder_block(const ParamView& P, const std::string& prefix, Tensor x,
                     int heads, real dropout, const Forward& fwd) {
  Tensor normed = layer_norm(x, P(prefix + ".ln1.g"), P(prefix + ".ln1.b"));
  x = add(x, multihead_attention(P, prefix, normed, normed, heads, dropout, fwd));
  Tensor normed2 = layer_norm(x, P(prefix + ".ln2.g"), P(prefix + ".ln2.b"));
  x = add(x, ffn_block(P, prefix, normed2, dropout, fwd));
  return x;
}

Tensor cross_block(const ParamView& P, const std::string& prefix, Tensor q,
                   const Tensor& kv, int heads, real dropout, const Forward& fwd) {
  Tensor nq = layer_norm(q, P(prefix + ".ln1.g"), P(prefix + ".ln1.b"));
  Tensor nkv = layer_norm(kv, P(prefix + ".lnkv.g"), P(prefix + ".lnkv.b"));
  q = add(q, multihead_attention(P, prefix, nq, nkv, heads, dropout, fwd));
  Tensor n2 = layer_norm(q, P(prefix + ".ln2.g"), P(prefix + ".ln2.b"));
  q = add(q, ffn_block(P, prefix, n2, dropout, fwd));
  return q;
}

Tensor run_encoder(const ParamView& P, const std::string& tree, const Tensor& input,
                   int layers, int channels, int tokens_per_channel, int heads,
                   real dropout, const Forward& fwd) {
  const int d = input.dim(1);
  if (input.dim(0) != channels * tokens_per_channel)
    throw std::invalid_argument("encoder: sequence length " +
                                std::to_string(input.dim(0)) +
                                " does not match grid " + std::to_string(channels) +
                                "x" + std::to_string(tokens_per_channel));
  // temporal encoding per token index, tiled across channels
  Tensor pe = temporal_encoding(tokens_per_channel, d);
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(channels) * static_cast<std::size_t>(tokens_per_channel));
  for (int c = 0; c < channels; ++c)
    for (int i = 0; i < tokens_per_channel; ++i) idx.push_back(i);
  Tensor x = add(input, rows_select(pe, idx));
  for (int l = 0; l < layers; ++l)
    x = encoder_block(P, tree + ".l" + std::to_string(l), x, heads, dropout, fwd);
  return x;
}

}  // namespace

ModelState init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelState st;
  st.config = cfg;
  Rng rng(derive_seed(seed, 0x6d6f64656cull));
  auto& p = st.params;
  p["embed.W"] = init_weight(rng, {cfg.bins(), cfg.d_e});
  p["embed.b"] = init_zeros({cfg.d_e});
  p["embed.mask_token"] = init_weight(rng, {cfg.d_e});
  if (cfg.ce == ChannelEmbeddingKind::learned)
    p["embed.ce_table"] = init_weight(
        rng, {static_cast<int>(cfg.learned_ce_names.size()), cfg.d_e});
  for (int l = 0; l < cfg.student_layers; ++l)
    add_block_params(p, "student.l" + std::to_string(l), cfg.d_e, cfg.ffn_mult,
                     false, rng);
  for (int l = 0; l < cfg.predictor_layers; ++l)
    add_block_params(p, "predictor.l" + std::to_string(l), cfg.d_e, cfg.ffn_mult,
                     true, rng);
  p["decoder.in.W"] = init_weight(rng, {2 * cfg.d_e, cfg.d_e});
  p["decoder.in.b"] = init_zeros({cfg.d_e});
  for (int l = 0; l < cfg.decoder_layers; ++l)
    add_block_params(p, "decoder.l" + std::to_string(l), cfg.d_e, cfg.ffn_mult,
                     false, rng);
  p["decoder.deconv.W"] = init_weight(rng, {cfg.d_e, 1, cfg.window});

  // teacher starts as an exact copy of the student
  for (const auto& [name, t] : p)
    if (name.rfind("student.", 0) == 0) st.teacher[name] = t.detach();
  return st;
}

Tensor temporal_encoding(int positions, int d_e) {
  if (positions < 1 || d_e < 2 || d_e % 2 != 0)
    throw std::invalid_argument("temporal_encoding: bad dimensions");
  std::vector<real> out(static_cast<std::size_t>(positions) * static_cast<std::size_t>(d_e));
  for (int i = 0; i < positions; ++i)
    for (int k = 0; k < d_e / 2; ++k) {
      const real w = std::pow(real(10000), real(-2) * static_cast<real>(k) / static_cast<real>(d_e));
      out[static_cast<std::size_t>(i) * d_e + 2 * k] = std::sin(static_cast<real>(i) * w);
      out[static_cast<std::size_t>(i) * d_e + 2 * k + 1] = std::cos(static_cast<real>(i) * w);
    }
  return Tensor::constant({positions, d_e}, std::move(out));
}

std::optional<Tensor> channel_embedding_for(
    const ModelState& state, const std::vector<std::string>& channel_names,
    const Atlas& atlas) {
  const auto& cfg = state.config;
  const int C = static_cast<int>(channel_names.size());
  switch (cfg.ce) {
    case ChannelEmbeddingKind::none:
      return std::nullopt;
    case ChannelEmbeddingKind::location: {
      std::vector<real> out;
      out.reserve(static_cast<std::size_t>(C) * static_cast<std::size_t>(cfg.d_e));
      for (const auto& name : channel_names) {
        const auto& pos = atlas.lookup(name);
        const auto enc = location_encoding(atlas.scaled_u(pos),
                                           atlas.scaled_v(pos), cfg.d_e);
        out.insert(out.end(), enc.begin(), enc.end());
      }
      return Tensor::constant({C, cfg.d_e}, std::move(out));
    }
    case ChannelEmbeddingKind::learned: {
      // Select known rows from the table; unseen channel names get zeros.
      std::vector<int> table_rows, targets;
      for (int c = 0; c < C; ++c) {
        const std::string key = lower(channel_names[static_cast<std::size_t>(c)]);
        for (std::size_t vi = 0; vi < cfg.learned_ce_names.size(); ++vi) {
          if (lower(cfg.learned_ce_names[vi]) == key) {
            table_rows.push_back(static_cast<int>(vi));
            targets.push_back(c);
            break;
          }
        }
      }
      const Tensor& table = state.param("embed.ce_table");
      if (table_rows.empty())
        return Tensor::zeros({C, cfg.d_e});
      return rows_scatter(C, rows_select(table, table_rows), targets);
    }
  }
  return std::nullopt;
}

Tensor encode_student(const ModelState& state, const Tensor& masked_embeddings,
                      int channels, int tokens_per_channel, const Forward& fwd) {
  ParamView P{&state.params};
  return run_encoder(P, "student", masked_embeddings, state.config.student_layers,
                     channels, tokens_per_channel, state.config.heads,
                     state.config.dropout, fwd);
}

Tensor encode_teacher(const ModelState& state, const Tensor& embeddings,
                      int channels, int tokens_per_channel) {
  ParamView P{&state.teacher};
  Forward eval{};
  return run_encoder(P, "student", embeddings.detach(),
                     state.config.student_layers, channels, tokens_per_channel,
                     state.config.heads, real(0), eval);
}

Tensor predictor_queries(const ModelState& state, const MaskPlan& plan,
                         const std::optional<Tensor>& channel_embedding) {
  const int d = state.config.d_e;
  const auto rows = plan.masked_rows();
  if (rows.empty())
    throw std::invalid_argument("predictor: mask plan selects no tokens");
  Tensor pe = temporal_encoding(plan.tokens_per_channel, d);
  std::vector<int> t_idx, c_idx;
  for (int r : rows) {
    c_idx.push_back(r / plan.tokens_per_channel);
    t_idx.push_back(r % plan.tokens_per_channel);
  }
  Tensor q = rows_select(pe, t_idx);
  if (channel_embedding)
    q = add(q, rows_select(*channel_embedding, c_idx));
  return q;
}

Tensor predict_masked(const ModelState& state, const Tensor& student_latents,
                      const MaskPlan& plan, const Tensor& queries,
                      const Forward& fwd) {
  const auto rows = plan.masked_rows();
  if (rows.empty())
    throw std::invalid_argument("predict_masked: empty mask set");
  if (queries.dim(0) != static_cast<int>(rows.size()))
    throw std::invalid_argument("predict_masked: query count " +
                                std::to_string(queries.dim(0)) +
                                " != masked count " + std::to_string(rows.size()));
  if (student_latents.dim(0) != plan.channels * plan.tokens_per_channel)
    throw std::invalid_argument("predict_masked: latents do not match plan");
  ParamView P{&state.params};
  Tensor q = queries;
  for (int l = 0; l < state.config.predictor_layers; ++l)
    q = cross_block(P, "predictor.l" + std::to_string(l), q, student_latents,
                    state.config.heads, state.config.dropout, fwd);
  return q;
}

Tensor decode(const ModelState& state, const Tensor& predictor_out,
              const Tensor& student_latents, const MaskPlan& plan,
              long signal_length, const Forward& fwd) {
  const auto& cfg = state.config;
  const int C = plan.channels, n = plan.tokens_per_channel;
  const int S = C * n;
  if (student_latents.dim(0) != S)
    throw std::invalid_argument("decode: latents do not match plan grid");
  const auto masked = plan.masked_rows();
  if (predictor_out.dim(0) != static_cast<int>(masked.size()))
    throw std::invalid_argument("decode: predictor rows do not match mask");

  // (predictor output | student latent); zeros in the left half at visible slots
  Tensor left = rows_scatter(S, predictor_out, masked);
  Tensor x = concat({left, student_latents}, 1);
  ParamView P{&state.params};
  x = add_rowwise(matmul(x, P("decoder.in.W")), P("decoder.in.b"));
  for (int l = 0; l < cfg.decoder_layers; ++l)
    x = encoder_block(P, "decoder.l" + std::to_string(l), x, cfg.heads,
                      cfg.dropout, fwd);

  // per-channel transposed convolution + overlap-add averaging
  const int step = cfg.window - cfg.overlap;
  const int full = (n - 1) * step + cfg.window;
  if (static_cast<long>(full) < signal_length)
    throw std::invalid_argument("decode: token grid covers " +
                                std::to_string(full) + " samples < L = " +
                                std::to_string(signal_length));
  std::vector<real> inv_counts(static_cast<std::size_t>(full), real(0));
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < cfg.window; ++t)
      inv_counts[static_cast<std::size_t>(i) * static_cast<std::size_t>(step) + static_cast<std::size_t>(t)] += real(1);
  for (auto& v : inv_counts) v = real(1) / v;
  Tensor weights = Tensor::constant({1, full}, std::move(inv_counts));

  std::vector<Tensor> rows;
  rows.reserve(static_cast<std::size_t>(C));
  const Tensor& deconv = P("decoder.deconv.W");
  for (int c = 0; c < C; ++c) {
    Tensor lat_c = slice(x, 0, c * n, n);              // [n, d]
    Tensor seq = transpose(lat_c);                     // [d, n]
    Tensor full_row = conv1d_transpose(seq, deconv, step);  // [1, full]
    full_row = mul(full_row, weights);
    rows.push_back(slice(full_row, 1, 0, static_cast<int>(signal_length)));
  }
  return concat(rows, 0);  // [C, L]
}

void ema_update(ModelState& state, real tau) {
  if (tau < real(0) || tau > real(1))
    throw std::invalid_argument("ema_update: tau must lie in [0, 1]");
  for (auto& [name, shadow] : state.teacher) {
    const Tensor& src = state.param(name);
    auto& dst = shadow.mutable_data();
    const auto& s = src.data();
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst[i] = tau * dst[i] + (real(1) - tau) * s[i];
  }
}

std::vector<std::string> trainable_keys(const ModelState& state) {
  std::vector<std::string> keys;
  keys.reserve(state.params.size());
  for (const auto& [name, t] : state.params) keys.push_back(name);
  return keys;  // std::map iteration is already sorted
}

}  // namespace eegx
