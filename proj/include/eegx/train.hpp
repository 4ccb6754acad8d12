#pragma once

// Pretraining loop: masked latent alignment against the EMA teacher,
// variance/covariance regularization of student latents, and dictionary-space
// reconstruction of the denoised signal; Adam with a cosine learning-rate
// schedule and a linear EMA ramp. Plus frozen-encoder embedding extraction.

#include <cstdint>
#include <vector>

#include "eegx/denoise.hpp"
#include "eegx/dict.hpp"
#include "eegx/metrics.hpp"
#include "eegx/model.hpp"
#include "eegx/synth.hpp"

namespace eegx {

struct LossWeights {
  real rec{1}, align{1}, reg{1};
};

struct MaskConfig {
  real ratio{real(0.5)};
  int block_len{0};  // <= 0: default max(1, n/4)
};

struct TrainConfig {
  int batch_size{256};
  int epochs{50};
  real lr{real(1e-3)};
  real lr_final{real(1e-5)};
  real adam_beta1{real(0.9)}, adam_beta2{real(0.999)}, adam_eps{real(1e-8)};
  real ema_start{real(0.996)}, ema_end{real(0.9999)};
  MaskConfig mask;
  LossWeights weights;
  DenoiserSpec denoiser;
  bool use_dict{true};  // false: plain time-domain MSE reconstruction loss
  int dict_groups{32};
  int dict_kernels{8};
  int dict_kernel_length{9};
  real val_fraction{real(0.1)};
  int patience{20};
  std::uint64_t seed{0};

  void validate() const;
};

struct StepLosses {
  long step{0};
  real rec{0}, align{0}, reg{0}, total{0};
};

struct EpochLosses {
  int epoch{0};
  real rec{0}, align{0}, reg{0}, total{0};
  real val_total{0};
};

struct TrainResult {
  std::vector<StepLosses> steps;
  std::vector<EpochLosses> epochs;
  bool early_stopped{false};
};

// Mean over masked positions of the squared L2 distance between predicted
// and target rows. Targets are expected off-tape (teacher side detached).
Tensor align_loss(const Tensor& predictions, const Tensor& targets);

// Variance hinge (per dimension, target gamma) plus the mean of squared
// off-diagonal entries of the population covariance of the latent rows.
Tensor reg_loss(const Tensor& latents, real gamma = real(1));

ModelState pretrain(const std::vector<LabeledRecording>& data,
                    const ModelConfig& mcfg, const TrainConfig& tcfg,
                    const Atlas& atlas, TrainResult* result = nullptr);

// Frozen tokenizer + student encoder, mean-pooled over tokens: one vector
// per recording. No masking, no parameter updates.
std::vector<std::vector<real>> embed(const ModelState& state,
                                     const std::vector<RawRecording>& recs,
                                     const Atlas& atlas);

// Convenience: embeddings + labels of a labeled set (noisy signals).
void embed_labeled(const ModelState& state,
                   const std::vector<LabeledRecording>& data, const Atlas& atlas,
                   std::vector<std::vector<real>>* features,
                   std::vector<int>* labels);

}  // namespace eegx
