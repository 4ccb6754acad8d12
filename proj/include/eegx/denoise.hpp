#pragma once

// Pluggable artifact-removal stage producing the clean reconstruction target.
// Three interchangeable kinds: oracle (ground-truth clean signal supplied by
// the synthetic generator), spectral (zero-phase band-pass plus line notch),
// and identity (raw passthrough, the raw-reconstruction ablation).

#include <optional>
#include <string>

#include "eegx/recording.hpp"

namespace eegx {

enum class DenoiserKind { oracle, spectral, identity };

DenoiserKind denoiser_kind_from_string(const std::string& s);
std::string to_string(DenoiserKind k);

struct DenoiserSpec {
  DenoiserKind kind{DenoiserKind::identity};
  real band_low_hz{real(0.5)};
  real band_high_hz{real(45)};
  real notch_hz{real(50)};   // 0 disables the notch
  // The notch zero sits on the unit circle, so suppression at the line
  // frequency is exact for any q; a moderate q keeps the impulse-response
  // tail short and edge transients negligible.
  real notch_q{real(5)};
  int filter_order{4};       // per band edge, before the zero-phase doubling
};

RawRecording denoise(const RawRecording& rec, const DenoiserSpec& spec,
                     const RawRecording* oracle_clean = nullptr);

}  // namespace eegx
