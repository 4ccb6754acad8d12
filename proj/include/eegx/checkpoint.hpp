#pragma once

// Model checkpoint container (little-endian binary):
//   magic    u64  "EEGXCKPT"
//   version  u32  (1)
//   config   model configuration fields
//   step     u64
//   params   u32 count, then per entry:
//            { u32 name_len, name bytes, u32 ndim, i32 dims..., f64 data }
// Doubles round-trip bit-exactly.

#include <string>

#include "eegx/model.hpp"

namespace eegx {

void save_checkpoint(const std::string& path, const ModelState& state);
ModelState load_checkpoint(const std::string& path);

}  // namespace eegx
