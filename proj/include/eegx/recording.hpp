#pragma once

#include <string>
#include <vector>

#include "eegx/tensor.hpp"

namespace eegx {

// Multi-channel raw signal, channel-major storage.
struct RawRecording {
  std::vector<std::string> channel_names;
  std::vector<real> samples;  // channels() x length(), row-major
  long length{0};             // samples per channel
  real sample_rate{0};        // Hz

  int channels() const { return static_cast<int>(channel_names.size()); }
  const real* channel(int c) const {
    return samples.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(length);
  }
  real* channel(int c) {
    return samples.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(length);
  }
  void validate() const;
};

}  // namespace eegx
