#pragma once

// Contiguous-block token masking for latent self-prediction. Per channel,
// non-overlapping blocks are drawn until the per-channel masked count hits
// round(ratio * n); at least one token per channel stays visible.

#include <cstdint>
#include <vector>

#include "eegx/tensor.hpp"
#include "eegx/tokenizer.hpp"

namespace eegx {

struct MaskPlan {
  int channels{0};
  int tokens_per_channel{0};
  real ratio{0};
  int block_len{0};
  std::uint64_t seed{0};
  std::vector<char> masked;  // row-major [C*n] indicator

  bool is_masked(int channel, int token) const {
    return masked[static_cast<std::size_t>(channel) *
                      static_cast<std::size_t>(tokens_per_channel) +
                  static_cast<std::size_t>(token)] != 0;
  }
  int masked_count() const;
  // Flat row indices (channel-major) of masked / visible positions.
  std::vector<int> masked_rows() const;
  std::vector<int> visible_rows() const;
};

// block_len <= 0 selects the default max(1, n/4).
MaskPlan make_mask(int channels, int tokens_per_channel, real ratio,
                   int block_len, std::uint64_t seed);

// Masked rows of the embedding matrix are replaced by the shared learned
// mask vector; visible rows pass through unchanged.
Tensor apply_mask(const Tensor& embeddings, const MaskPlan& plan,
                  const Tensor& mask_token);

}  // namespace eegx
