#pragma once

// Small signal-processing kernels: single-frame DFT magnitudes and
// zero-phase IIR filtering built from biquad cascades.

#include <vector>

#include "eegx/tensor.hpp"

namespace eegx {

// Magnitude spectrum (bins 0..n/2) of one frame. Radix-2 FFT when the frame
// length is a power of two, direct DFT otherwise. `hann` applies a periodic
// Hann window before the transform.
std::vector<real> frame_magnitude(const real* x, int n, bool hann);

struct Biquad {
  real b0{0}, b1{0}, b2{0};  // numerator
  real a1{0}, a2{0};         // denominator (a0 normalized to 1)
};

// Even-order Butterworth cascades (order/2 biquads each).
std::vector<Biquad> butterworth_lowpass(int order, real cutoff_hz, real fs_hz);
std::vector<Biquad> butterworth_highpass(int order, real cutoff_hz, real fs_hz);
Biquad notch(real f0_hz, real q, real fs_hz);

// Forward-backward (zero-phase) application of a biquad cascade with
// odd-reflection edge padding. pad_len < 0 selects a section-count
// heuristic; callers with long-ringing sections (narrow notches, sub-Hz
// high-pass) should pass a pad covering the impulse-response tail.
std::vector<real> filtfilt(const std::vector<Biquad>& sections,
                           const std::vector<real>& x, long pad_len = -1);

}  // namespace eegx
