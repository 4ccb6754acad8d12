#include "eegx/tokenizer.hpp"

#include <algorithm>
#include <stdexcept>

#include "eegx/dsp.hpp"

namespace eegx {

int token_count(long length, int window, int overlap) {
  if (window < 1) throw std::invalid_argument("tokenizer: window must be >= 1");
  if (overlap < 0 || overlap >= window)
    throw std::invalid_argument("tokenizer: overlap " + std::to_string(overlap) +
                                " must satisfy 0 <= o < w = " +
                                std::to_string(window));
  if (length < 1) throw std::invalid_argument("tokenizer: empty signal");
  const long step = window - overlap;
  if (length <= overlap) return 1;
  return static_cast<int>((length - overlap + step - 1) / step);
}

Tensor segment(const RawRecording& rec, int window, int overlap) {
  rec.validate();
  const int n = token_count(rec.length, window, overlap);
  const int C = rec.channels();
  const long step = window - overlap;
  std::vector<real> out(static_cast<std::size_t>(C) * n * window, real(0));
  for (int c = 0; c < C; ++c) {
    const real* x = rec.channel(c);
    for (int i = 0; i < n; ++i) {
      const long start = static_cast<long>(i) * step;
      const long take = std::min<long>(window, rec.length - start);
      real* dst = out.data() +
                  (static_cast<std::size_t>(c) * n + i) * static_cast<std::size_t>(window);
      for (long t = 0; t < take; ++t) dst[t] = x[start + t];
      // remainder stays zero-padded
    }
  }
  return Tensor::constant({C * n, window}, std::move(out));
}

Tensor token_magnitudes(const Tensor& raw_tokens, bool hann) {
  if (raw_tokens.ndim() != 2)
    throw std::invalid_argument("token_magnitudes: expected [rows, w] tokens");
  const int rows = raw_tokens.dim(0), w = raw_tokens.dim(1);
  const int bins = w / 2 + 1;
  std::vector<real> out(static_cast<std::size_t>(rows) * bins);
  for (int r = 0; r < rows; ++r) {
    const auto mag =
        frame_magnitude(raw_tokens.data().data() + static_cast<std::size_t>(r) * w, w, hann);
    std::copy(mag.begin(), mag.end(), out.begin() + static_cast<std::ptrdiff_t>(r) * bins);
  }
  return Tensor::constant({rows, bins}, std::move(out));
}

Tensor stft_embed(const Tensor& magnitudes, const Tensor& W, const Tensor& b) {
  if (W.ndim() != 2)
    throw std::invalid_argument("stft_embed: W must be [bins, d_e]");
  if (magnitudes.dim(1) != W.dim(0))
    throw std::invalid_argument(
        "stft_embed: token spectrum width " + std::to_string(magnitudes.dim(1)) +
        " incompatible with embedding configured for " +
        std::to_string(W.dim(0)) + " bins");
  return add_rowwise(matmul(magnitudes, W), b);
}

Tensor channel_location_encodings(const RawRecording& rec, const Atlas& atlas,
                                  int d_e) {
  const int C = rec.channels();
  std::vector<real> out;
  out.reserve(static_cast<std::size_t>(C) * static_cast<std::size_t>(d_e));
  for (int c = 0; c < C; ++c) {
    const auto& pos = atlas.lookup(rec.channel_names[static_cast<std::size_t>(c)]);
    const auto enc =
        location_encoding(atlas.scaled_u(pos), atlas.scaled_v(pos), d_e);
    out.insert(out.end(), enc.begin(), enc.end());
  }
  return Tensor::constant({C, d_e}, std::move(out));
}

TokenBatch tokenize(const RawRecording& rec, const TokenizerConfig& cfg,
                    const Tensor& W, const Tensor& b,
                    const Tensor* channel_embedding) {
  TokenBatch batch;
  batch.channels = rec.channels();
  batch.window = cfg.window;
  batch.overlap = cfg.overlap;
  batch.signal_length = rec.length;
  batch.tokens_per_channel = token_count(rec.length, cfg.window, cfg.overlap);
  batch.raw_tokens = segment(rec, cfg.window, cfg.overlap);
  batch.magnitudes = token_magnitudes(batch.raw_tokens, cfg.hann);
  Tensor emb = stft_embed(batch.magnitudes, W, b);
  if (channel_embedding) {
    if (channel_embedding->ndim() != 2 ||
        channel_embedding->dim(0) != batch.channels ||
        channel_embedding->dim(1) != emb.dim(1))
      throw std::invalid_argument(
          "tokenize: channel embedding shape " +
          shape_str(channel_embedding->shape()) + " does not match [C=" +
          std::to_string(batch.channels) + ", d_e=" + std::to_string(emb.dim(1)) +
          "]");
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(batch.channels) *
                static_cast<std::size_t>(batch.tokens_per_channel));
    for (int c = 0; c < batch.channels; ++c)
      for (int i = 0; i < batch.tokens_per_channel; ++i) idx.push_back(c);
    emb = add(emb, rows_select(*channel_embedding, idx));
  }
  batch.embeddings = std::move(emb);
  return batch;
}

}  // namespace eegx
