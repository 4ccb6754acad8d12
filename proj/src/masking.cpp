#include "eegx/masking.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "eegx/util.hpp"

namespace eegx {

int MaskPlan::masked_count() const {
  int total = 0;
  for (char m : masked) total += m ? 1 : 0;
  return total;
}

std::vector<int> MaskPlan::masked_rows() const {
  std::vector<int> rows;
  for (std::size_t i = 0; i < masked.size(); ++i)
    if (masked[i]) rows.push_back(static_cast<int>(i));
  return rows;
}

std::vector<int> MaskPlan::visible_rows() const {
  std::vector<int> rows;
  for (std::size_t i = 0; i < masked.size(); ++i)
    if (!masked[i]) rows.push_back(static_cast<int>(i));
  return rows;
}

MaskPlan make_mask(int channels, int tokens_per_channel, real ratio,
                   int block_len, std::uint64_t seed) {
  const int n = tokens_per_channel;
  if (channels < 1 || n < 1)
    throw std::invalid_argument("make_mask: empty token grid");
  if (!(ratio > real(0) && ratio < real(1)))
    throw std::invalid_argument("make_mask: ratio must lie in (0, 1)");
  if (block_len <= 0) block_len = std::max(1, n / 4);
  if (block_len > n)
    throw std::invalid_argument("make_mask: block length " +
                                std::to_string(block_len) + " exceeds " +
                                std::to_string(n) + " tokens");
  const int target = static_cast<int>(std::lround(static_cast<double>(ratio) * n));
  if (ratio * static_cast<real>(n) < real(1))
    throw std::invalid_argument("make_mask: ratio*n < 1, nothing to mask");
  if (target >= n)
    throw std::invalid_argument(
        "make_mask: masking " + std::to_string(target) + " of " +
        std::to_string(n) + " tokens leaves no visible token");

  MaskPlan plan;
  plan.channels = channels;
  plan.tokens_per_channel = n;
  plan.ratio = ratio;
  plan.block_len = block_len;
  plan.seed = seed;
  plan.masked.assign(static_cast<std::size_t>(channels) * static_cast<std::size_t>(n), 0);

  Rng rng(derive_seed(seed, 0x6d61736bull));
  std::vector<int> starts;
  for (int c = 0; c < channels; ++c) {
    char* row = plan.masked.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(n);
    int remaining = target;
    // Draw non-overlapping blocks; the final block shrinks to hit the
    // per-channel target exactly.
    int guard = 0;
    while (remaining > 0) {
      const int len = std::min(block_len, remaining);
      starts.clear();
      for (int s = 0; s + len <= n; ++s) {
        bool free = true;
        for (int j = 0; j < len; ++j)
          if (row[s + j]) {
            free = false;
            break;
          }
        if (free) starts.push_back(s);
      }
      if (starts.empty()) {
        // No room for a full block among the gaps; fill any free slots.
        for (int s = 0; s < n && remaining > 0; ++s)
          if (!row[s]) {
            row[s] = 1;
            --remaining;
          }
        break;
      }
      const int pick =
          starts[std::uniform_int_distribution<std::size_t>(0, starts.size() - 1)(rng)];
      for (int j = 0; j < len; ++j) row[pick + j] = 1;
      remaining -= len;
      if (++guard > 4 * n) break;
    }
  }
  return plan;
}

Tensor apply_mask(const Tensor& embeddings, const MaskPlan& plan,
                  const Tensor& mask_token) {
  if (embeddings.ndim() != 2 ||
      embeddings.dim(0) != plan.channels * plan.tokens_per_channel)
    throw std::invalid_argument(
        "apply_mask: embeddings shape " + shape_str(embeddings.shape()) +
        " does not match plan grid " + std::to_string(plan.channels) + "x" +
        std::to_string(plan.tokens_per_channel));
  return masked_fill_rows(embeddings, plan.masked, mask_token);
}

}  // namespace eegx
