#include "eegx/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "eegx/tokenizer.hpp"

namespace eegx {

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
  if (epochs < 1 || epochs > 300)
    throw std::invalid_argument("train: epochs must lie in [1, 300]");
  if (!(lr > real(0))) throw std::invalid_argument("train: lr must be positive");
  if (!(mask.ratio > real(0) && mask.ratio < real(1)))
    throw std::invalid_argument("train: mask ratio must lie in (0, 1)");
  if (weights.rec < real(0) || weights.align < real(0) || weights.reg < real(0))
    throw std::invalid_argument("train: loss weights must be nonnegative");
  if (val_fraction < real(0) || val_fraction >= real(1))
    throw std::invalid_argument("train: val fraction must lie in [0, 1)");
  if (dict_groups < 1 || dict_kernels < 1 || dict_kernel_length < 1)
    throw std::invalid_argument("train: dictionary parameters must be >= 1");
}

Tensor align_loss(const Tensor& predictions, const Tensor& targets) {
  if (predictions.ndim() != 2 || predictions.shape() != targets.shape())
    throw std::invalid_argument("align_loss: shape mismatch " +
                                shape_str(predictions.shape()) + " vs " +
                                shape_str(targets.shape()));
  const int B = predictions.dim(0);
  if (B < 1) throw std::invalid_argument("align_loss: empty masked set");
  return scale(squared_l2(sub(predictions, targets)), real(1) / static_cast<real>(B));
}

Tensor reg_loss(const Tensor& latents, real gamma) {
  if (latents.ndim() != 2)
    throw std::invalid_argument("reg_loss: expected [rows, dims]");
  const int N = latents.dim(0), D = latents.dim(1);
  if (N < 2) throw std::invalid_argument("reg_loss: needs at least 2 rows");
  // variance hinge: mean over dims of max(0, gamma - std)
  Tensor stddev = sqrt_eps(row_variance(latents), real(0));
  Tensor var_term = mean(relu(add_scalar(scale(stddev, real(-1)), gamma)));
  // covariance: population covariance of centered rows, squared off-diagonals
  Tensor centered = add_rowwise(latents, scale(col_mean(latents), real(-1)));
  Tensor cov = scale(matmul(transpose(centered), centered), real(1) / static_cast<real>(N));
  std::vector<real> off_mask(static_cast<std::size_t>(D) * static_cast<std::size_t>(D), real(1));
  for (int j = 0; j < D; ++j) off_mask[static_cast<std::size_t>(j) * D + j] = real(0);
  Tensor off = mul(cov, Tensor::constant({D, D}, std::move(off_mask)));
  Tensor cov_term =
      scale(squared_l2(off), real(1) / static_cast<real>(D * (D - 1)));
  return add(var_term, cov_term);
}

namespace {

struct Adam {
  real beta1, beta2, eps;
  long t{0};
  std::vector<std::vector<real>> m, v;

  void init(const ModelState& state, const std::vector<std::string>& keys) {
    m.resize(keys.size());
    v.resize(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const std::size_t n = state.param(keys[i]).size();
      m[i].assign(n, real(0));
      v[i].assign(n, real(0));
    }
  }

  void step(ModelState& state, const std::vector<std::string>& keys, real lr) {
    ++t;
    const real bc1 = real(1) - std::pow(beta1, static_cast<real>(t));
    const real bc2 = real(1) - std::pow(beta2, static_cast<real>(t));
    for (std::size_t i = 0; i < keys.size(); ++i) {
      Tensor& p = state.param(keys[i]);
      if (!p.has_grad()) continue;
      const auto& g = p.grad();
      auto& data = p.mutable_data();
      for (std::size_t j = 0; j < data.size(); ++j) {
        m[i][j] = beta1 * m[i][j] + (real(1) - beta1) * g[j];
        v[i][j] = beta2 * v[i][j] + (real(1) - beta2) * g[j] * g[j];
        const real mh = m[i][j] / bc1;
        const real vh = v[i][j] / bc2;
        data[j] -= lr * mh / (std::sqrt(vh) + eps);
      }
    }
  }
};

real cosine_lr(real lr0, real lr1, long step, long total) {
  if (total <= 1) return lr1;
  const real f = static_cast<real>(step) / static_cast<real>(total - 1);
  return lr1 + (lr0 - lr1) *
                   (real(0.5) * (real(1) + std::cos(std::numbers::pi_v<real> * f)));
}

struct BatchLosses {
  Tensor rec, align, reg, total;
};

// One forward pass over a set of recordings; returns the three losses and,
// through `latents_out`, the student latents of each recording.
BatchLosses forward_losses(ModelState& state, const TrainConfig& tcfg,
                           const std::vector<const LabeledRecording*>& batch,
                           const std::vector<const std::vector<real>*>& targets,
                           const Atlas& atlas, const DiCTDictionary* dict,
                           const TokenizerConfig& tokcfg, long step,
                           bool train, Rng* rng) {
  Forward fwd;
  fwd.train = train;
  fwd.rng = rng;
  std::vector<Tensor> rec_losses, align_losses, latents_all;
  for (std::size_t bi = 0; bi < batch.size(); ++bi) {
    const LabeledRecording& item = *batch[bi];
    const auto ce = channel_embedding_for(state, item.noisy.channel_names, atlas);
    TokenBatch tokens = tokenize(item.noisy, tokcfg, state.param("embed.W"),
                                 state.param("embed.b"), ce ? &*ce : nullptr);
    const int C = tokens.channels, n = tokens.tokens_per_channel;
    MaskPlan plan = make_mask(
        C, n, tcfg.mask.ratio, tcfg.mask.block_len,
        derive_seed(tcfg.seed, 0x9e370001ull * static_cast<std::uint64_t>(step) + bi));
    Tensor masked = apply_mask(tokens.embeddings, plan, state.param("embed.mask_token"));
    Tensor student = encode_student(state, masked, C, n, fwd);
    Tensor teacher = encode_teacher(state, tokens.embeddings, C, n);
    Tensor queries = predictor_queries(state, plan, ce);
    Tensor pred = predict_masked(state, student, plan, queries, fwd);
    Tensor target_rows = rows_select(teacher, plan.masked_rows());
    align_losses.push_back(align_loss(pred, target_rows));
    if (tcfg.weights.rec > real(0)) {
      Tensor decoded = decode(state, pred, student, plan, item.noisy.length, fwd);
      Tensor clean = Tensor::constant(
          {C, static_cast<int>(item.noisy.length)}, *targets[bi]);
      rec_losses.push_back(dict ? dict_loss(clean, decoded, *dict)
                                : direct_mse(clean, decoded));
    }
    latents_all.push_back(student);
  }
  auto mean_of = [](std::vector<Tensor>& xs) {
    Tensor acc = xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
    return scale(acc, real(1) / static_cast<real>(xs.size()));
  };
  BatchLosses out;
  out.align = mean_of(align_losses);
  out.rec = rec_losses.empty() ? Tensor::scalar(real(0)) : mean_of(rec_losses);
  out.reg = reg_loss(latents_all.size() == 1 ? latents_all[0]
                                             : concat(latents_all, 0));
  out.total = add(add(scale(out.rec, tcfg.weights.rec),
                      scale(out.align, tcfg.weights.align)),
                  scale(out.reg, tcfg.weights.reg));
  return out;
}

}  // namespace

ModelState pretrain(const std::vector<LabeledRecording>& data,
                    const ModelConfig& mcfg, const TrainConfig& tcfg,
                    const Atlas& atlas, TrainResult* result) {
  if (data.empty()) throw std::invalid_argument("pretrain: empty dataset");
  tcfg.validate();
  mcfg.validate();

  // held-out validation split for early stopping
  std::vector<LabeledRecording> train_set, val_set;
  if (tcfg.val_fraction > real(0) && data.size() >= 10) {
    auto [tr, va] = split_stratified(data, real(1) - tcfg.val_fraction,
                                     derive_seed(tcfg.seed, 0x76616cull));
    train_set = std::move(tr);
    val_set = std::move(va);
  } else {
    train_set = data;
  }

  // reconstruction targets (denoised view of the noisy input)
  auto make_targets = [&](const std::vector<LabeledRecording>& set) {
    std::vector<std::vector<real>> targets;
    targets.reserve(set.size());
    for (const auto& item : set)
      targets.push_back(denoise(item.noisy, tcfg.denoiser, &item.clean).samples);
    return targets;
  };
  const auto train_targets = make_targets(train_set);
  const auto val_targets = make_targets(val_set);

  long max_len = 0;
  for (const auto& item : data) max_len = std::max(max_len, item.noisy.length);
  DiCTDictionary dict;
  if (tcfg.use_dict && tcfg.weights.rec > real(0))
    dict = build_dictionary(tcfg.dict_groups, tcfg.dict_kernels,
                            tcfg.dict_kernel_length, max_len,
                            derive_seed(tcfg.seed, 0x6b65726eull));
  const DiCTDictionary* dict_ptr =
      (tcfg.use_dict && tcfg.weights.rec > real(0)) ? &dict : nullptr;

  ModelState state = init_model(mcfg, tcfg.seed);
  TokenizerConfig tokcfg;
  tokcfg.window = mcfg.window;
  tokcfg.overlap = mcfg.overlap;

  const auto keys = trainable_keys(state);
  Adam adam{tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps};
  adam.init(state, keys);

  const long steps_per_epoch =
      (static_cast<long>(train_set.size()) + tcfg.batch_size - 1) / tcfg.batch_size;
  const long total_steps = steps_per_epoch * tcfg.epochs;

  Rng rng(derive_seed(tcfg.seed, 0x747261696eull));
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  real best_val = std::numeric_limits<real>::infinity();
  int since_best = 0;
  long step = 0;

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    real ep_rec = 0, ep_align = 0, ep_reg = 0, ep_total = 0;
    long ep_steps = 0;
    for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(tcfg.batch_size)) {
      std::vector<const LabeledRecording*> batch;
      std::vector<const std::vector<real>*> targets;
      for (std::size_t i = pos;
           i < std::min(order.size(), pos + static_cast<std::size_t>(tcfg.batch_size)); ++i) {
        batch.push_back(&train_set[order[i]]);
        targets.push_back(&train_targets[order[i]]);
      }
      auto losses = forward_losses(state, tcfg, batch, targets, atlas, dict_ptr,
                                   tokcfg, step, /*train=*/true, &rng);
      const real l_rec = losses.rec.item();
      const real l_align = losses.align.item();
      const real l_reg = losses.reg.item();
      const real l_total = losses.total.item();
      if (!std::isfinite(l_total)) {
        std::ostringstream os;
        os << "pretrain: non-finite loss at step " << step << " (rec=" << l_rec
           << ", align=" << l_align << ", reg=" << l_reg << ")";
        throw std::runtime_error(os.str());
      }
      backward(losses.total);
      adam.step(state, keys, cosine_lr(tcfg.lr, tcfg.lr_final, step, total_steps));
      for (const auto& k : keys) state.param(k).zero_grad();
      const real f = total_steps > 1
                         ? static_cast<real>(step) / static_cast<real>(total_steps - 1)
                         : real(1);
      ema_update(state, tcfg.ema_start + (tcfg.ema_end - tcfg.ema_start) * f);
      state.step = ++step;
      if (result)
        result->steps.push_back({step, l_rec, l_align, l_reg, l_total});
      ep_rec += l_rec;
      ep_align += l_align;
      ep_reg += l_reg;
      ep_total += l_total;
      ++ep_steps;
    }

    EpochLosses ep;
    ep.epoch = epoch;
    ep.rec = ep_rec / static_cast<real>(ep_steps);
    ep.align = ep_align / static_cast<real>(ep_steps);
    ep.reg = ep_reg / static_cast<real>(ep_steps);
    ep.total = ep_total / static_cast<real>(ep_steps);

    if (!val_set.empty()) {
      std::vector<const LabeledRecording*> vbatch;
      std::vector<const std::vector<real>*> vtargets;
      for (std::size_t i = 0; i < val_set.size(); ++i) {
        vbatch.push_back(&val_set[i]);
        vtargets.push_back(&val_targets[i]);
      }
      auto vloss = forward_losses(state, tcfg, vbatch, vtargets, atlas, dict_ptr,
                                  tokcfg, 0x56000000l + epoch, /*train=*/false,
                                  nullptr);
      ep.val_total = vloss.total.item();
      if (ep.val_total < best_val - real(1e-9)) {
        best_val = ep.val_total;
        since_best = 0;
      } else if (++since_best >= tcfg.patience) {
        if (result) {
          result->epochs.push_back(ep);
          result->early_stopped = true;
        }
        break;
      }
    } else {
      ep.val_total = ep.total;
    }
    if (result) result->epochs.push_back(ep);
  }
  return state;
}

std::vector<std::vector<real>> embed(const ModelState& state,
                                     const std::vector<RawRecording>& recs,
                                     const Atlas& atlas) {
  TokenizerConfig tokcfg;
  tokcfg.window = state.config.window;
  tokcfg.overlap = state.config.overlap;
  Forward eval{};
  std::vector<std::vector<real>> out;
  out.reserve(recs.size());
  for (const auto& rec : recs) {
    const auto ce = channel_embedding_for(state, rec.channel_names, atlas);
    TokenBatch tokens = tokenize(rec, tokcfg, state.param("embed.W"),
                                 state.param("embed.b"), ce ? &*ce : nullptr);
    Tensor latents = encode_student(state, tokens.embeddings, tokens.channels,
                                    tokens.tokens_per_channel, eval);
    const int S = latents.dim(0), d = latents.dim(1);
    std::vector<real> pooled(static_cast<std::size_t>(d), real(0));
    for (int i = 0; i < S; ++i)
      for (int j = 0; j < d; ++j)
        pooled[static_cast<std::size_t>(j)] += latents.data()[static_cast<std::size_t>(i) * d + j];
    for (auto& v : pooled) v /= static_cast<real>(S);
    out.push_back(std::move(pooled));
  }
  return out;
}

void embed_labeled(const ModelState& state,
                   const std::vector<LabeledRecording>& data, const Atlas& atlas,
                   std::vector<std::vector<real>>* features,
                   std::vector<int>* labels) {
  std::vector<RawRecording> recs;
  recs.reserve(data.size());
  for (const auto& item : data) recs.push_back(item.noisy);
  *features = embed(state, recs, atlas);
  labels->clear();
  for (const auto& item : data) labels->push_back(item.label);
}

}  // namespace eegx
