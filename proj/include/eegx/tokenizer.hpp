#pragma once

// Raw EEG -> token embeddings: overlapping window segmentation, single-frame
// spectral magnitude embedding through a learned linear layer, and an
// additive per-channel location encoding.

#include <vector>

#include "eegx/atlas.hpp"
#include "eegx/recording.hpp"
#include "eegx/tensor.hpp"

namespace eegx {

struct TokenizerConfig {
  int window{128};   // w, samples per token
  int overlap{32};   // o, shared samples between consecutive tokens
  bool hann{true};   // window applied before the frame transform
};

struct TokenBatch {
  int channels{0};
  int tokens_per_channel{0};  // n
  int window{0};
  int overlap{0};
  long signal_length{0};
  Tensor raw_tokens;   // [C*n, w] constant
  Tensor magnitudes;   // [C*n, w/2+1] constant
  Tensor embeddings;   // [C*n, d_e]; on the tape when W/b are leaves
  int row(int channel, int token) const {
    return channel * tokens_per_channel + token;
  }
};

// Number of tokens per channel: every token must contribute at least one
// previously unseen sample; a short final token is zero-padded, and a
// recording shorter than one window still yields a single padded token.
int token_count(long length, int window, int overlap);

// [C*n, w] raw token matrix (constant). Token i of a channel starts at
// sample i*(w-o). Throws when overlap >= window.
Tensor segment(const RawRecording& rec, int window, int overlap);

// Per-token magnitude spectra of the raw token matrix, [C*n, w/2+1].
Tensor token_magnitudes(const Tensor& raw_tokens, bool hann);

// e = m W + b per token row. W: [bins, d_e], b: [d_e]. Differentiable in
// W and b; throws when the spectrum width does not match W.
Tensor stft_embed(const Tensor& magnitudes, const Tensor& W, const Tensor& b);

// Per-channel location encodings for a recording resolved against the atlas,
// as a [C, d_e] constant tensor.
Tensor channel_location_encodings(const RawRecording& rec, const Atlas& atlas,
                                  int d_e);

// Full tokenizer: segmentation, spectral embedding, plus an optional additive
// per-channel embedding ([C, d_e]; pass nullptr to omit). The channel
// embedding row for channel c is added to every token of channel c.
TokenBatch tokenize(const RawRecording& rec, const TokenizerConfig& cfg,
                    const Tensor& W, const Tensor& b,
                    const Tensor* channel_embedding);

}  // namespace eegx
