#pragma once

// Student/teacher encoders (pre-norm transformers), cross-attention
// predictor, transformer + transposed-convolution decoder, and the signal
// embedding parameters. The teacher is an EMA shadow of the student and
// never records gradients.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eegx/atlas.hpp"
#include "eegx/masking.hpp"
#include "eegx/recording.hpp"
#include "eegx/tensor.hpp"
#include "eegx/tokenizer.hpp"
#include "eegx/util.hpp"

namespace eegx {

enum class ChannelEmbeddingKind { none, learned, location };

ChannelEmbeddingKind channel_embedding_kind_from_string(const std::string& s);
std::string to_string(ChannelEmbeddingKind k);

struct ModelConfig {
  int d_e{16};
  int heads{8};
  int student_layers{4};
  int predictor_layers{2};
  int decoder_layers{2};
  int ffn_mult{4};
  real dropout{real(0.1)};
  int window{128};
  int overlap{32};
  ChannelEmbeddingKind ce{ChannelEmbeddingKind::location};
  // channel vocabulary for the learned embedding table
  std::vector<std::string> learned_ce_names;

  int bins() const { return window / 2 + 1; }
  void validate() const;
};

struct ModelState {
  ModelConfig config;
  std::map<std::string, Tensor> params;   // trainable leaves
  std::map<std::string, Tensor> teacher;  // EMA shadow of student.* (constants)
  long step{0};

  Tensor& param(const std::string& name);
  const Tensor& param(const std::string& name) const;
};

ModelState init_model(const ModelConfig& cfg, std::uint64_t seed);

// Per-call forward context; dropout fires only when train is set.
struct Forward {
  bool train{false};
  Rng* rng{nullptr};
};

// Standard sinusoidal encoding of token indices, [n, d_e] constant.
Tensor temporal_encoding(int positions, int d_e);

// Per-channel embedding matrix [C, d_e] for this recording, or nullopt when
// the configuration uses none. Learned tables fall back to a zero row for
// channel names outside the training vocabulary.
std::optional<Tensor> channel_embedding_for(const ModelState& state,
                                            const std::vector<std::string>& channel_names,
                                            const Atlas& atlas);

// 4-layer pre-norm transformer over the flattened channel-token sequence.
// Adds the temporal encoding (per token index, shared across channels)
// before the first block.
Tensor encode_student(const ModelState& state, const Tensor& masked_embeddings,
                      int channels, int tokens_per_channel, const Forward& fwd);

// Teacher pass: same architecture, teacher weights, inputs detached, no
// gradient recording.
Tensor encode_teacher(const ModelState& state, const Tensor& embeddings,
                      int channels, int tokens_per_channel);

// Cross-attention predictor. Queries: temporal encoding of each masked slot
// plus its channel embedding row (when configured). Keys/values: student
// latents. Returns predictions for masked rows, in plan.masked_rows() order.
Tensor predict_masked(const ModelState& state, const Tensor& student_latents,
                      const MaskPlan& plan, const Tensor& queries,
                      const Forward& fwd);

// Builds predictor queries for a plan: [|B|, d_e] (constant unless the
// learned table participates).
Tensor predictor_queries(const ModelState& state, const MaskPlan& plan,
                         const std::optional<Tensor>& channel_embedding);

// Decoder: per position, concatenated (predictor output | student latent)
// with zeros in the predictor half at visible slots; transformer over the
// full sequence; per-token transposed convolution to window length; and
// overlap-add with averaging down to [C, L].
Tensor decode(const ModelState& state, const Tensor& predictor_out,
              const Tensor& student_latents, const MaskPlan& plan,
              long signal_length, const Forward& fwd);

// teacher <- tau * teacher + (1 - tau) * student, parameterwise.
void ema_update(ModelState& state, real tau);

// Deterministic ordering of trainable parameter names.
std::vector<std::string> trainable_keys(const ModelState& state);

}  // namespace eegx
