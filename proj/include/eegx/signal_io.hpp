#pragma once

// Signal container I/O.
//
// Binary format (little-endian):
//   magic   u32  'E','S','G','1'
//   version u32  (1)
//   C       u32  channel count
//   L       u64  samples per channel
//   rate    f64  sample rate in Hz
//   names   C x { u32 length, bytes }
//   data    C*L f32, channel-major
//
// CSV fallback: first row channel names, one row of samples per time step;
// sample rate passed by the caller (the CSV carries none).

#include <string>

#include "eegx/recording.hpp"

namespace eegx {

void write_signal(const std::string& path, const RawRecording& rec);
RawRecording read_signal(const std::string& path);

void write_signal_csv(const std::string& path, const RawRecording& rec);
RawRecording read_signal_csv(const std::string& path, real sample_rate);

}  // namespace eegx
