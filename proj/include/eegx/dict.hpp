#pragma once

// Dictionary convolution transform: fixed random dilated kernels organized
// into competing groups. At every time step the kernels of a group compete;
// the strongest (max) and weakest (min) responses win their pathways.
//
// Two feature readouts share the winner structure:
//   soft: winning response values accumulated per kernel, normalized by L.
//         Differentiable with winner-routed gradients and positively
//         amplitude-equivariant; this is the reconstruction-loss space.
//   hard: winner counts per kernel, normalized by L. Scale-free win-pattern
//         statistics; this is the readout the synthetic frequency/shape
//         demonstration measures, where value sums would cancel out
//         oscillatory differences.

#include <cstdint>
#include <vector>

#include "eegx/tensor.hpp"

namespace eegx {

struct DiCTDictionary {
  int groups{0};             // G
  int kernels_per_group{0};  // K
  int kernel_length{0};      // odd
  long design_length{0};     // max signal length the dilation list covers
  std::uint64_t seed{0};
  std::vector<int> dilations;  // 1, 2, 4, ... receptive field <= design_length
  std::vector<real> weights;   // [G*K, kernel_length], each kernel zero-mean

  const real* kernel(int g, int k) const {
    return weights.data() +
           (static_cast<std::size_t>(g) * static_cast<std::size_t>(kernels_per_group) +
            static_cast<std::size_t>(k)) *
               static_cast<std::size_t>(kernel_length);
  }
  // per-channel feature length: G * K * |dilations| * 2 pathways
  int feature_length() const {
    return groups * kernels_per_group * static_cast<int>(dilations.size()) * 2;
  }
};

// Standard-normal kernels, mean-centered so constant signals produce zero
// response; deterministic in the seed.
DiCTDictionary build_dictionary(int groups, int kernels_per_group,
                                int kernel_length, long signal_length,
                                std::uint64_t seed);

// Soft features of a [C, L] signal tensor: [C, feature_length()].
// Differentiable; gradients flow only into winning-response positions.
Tensor dict_transform(const Tensor& x, const DiCTDictionary& dict);

// Hard (win-count) features of a raw [C, L] signal, normalized by L.
std::vector<real> dict_hard_features(const real* x, int channels, long length,
                                     const DiCTDictionary& dict);

// Squared distance between soft features of the two signals, summed over
// channels and normalized by the total feature count. Zero iff the feature
// vectors coincide (a pseudometric: distinct signals can collide, e.g. the
// same burst translated within the interior of an otherwise silent signal).
Tensor dict_loss(const Tensor& clean, const Tensor& decoded,
                 const DiCTDictionary& dict);

// Plain time-domain mean squared error.
Tensor direct_mse(const Tensor& a, const Tensor& b);

// ---- synthetic frequency/shape demonstration --------------------------------
// A composite source (strong slow + moderate mid + weak fast sinusoid) is
// compared against three reconstructions: slow-only, spectrally balanced
// with attenuated slow component, and the balanced one with a uniform phase
// shift. Direct MSE rewards the slow-only reconstruction; distances in the
// dictionary win-pattern space penalize it and tolerate the phase shift.

struct DictDemoConfig {
  real sample_rate{1000};
  real duration_s{1};
  real low_hz{2}, mid_hz{20}, high_hz{100};
  real low_amp{5}, mid_amp{1}, high_amp{real(0.5)};
  // slow-only reconstruction keeps a small trace of the fast component
  real recon1_high_amp{real(0.1)};
  real recon2_low_amp{real(2.5)};
  real phase_shift{real(1.0471975511965977)};  // pi/3
  int groups{32};
  int kernels_per_group{8};
  int kernel_length{9};
  std::uint64_t seed{0};
};

struct DictDemoReport {
  std::vector<real> source, recon1, recon2, recon3;
  real direct_mse[3]{};
  real dict_mse[3]{};
  bool direct_increasing{false};    // d1 < d2 < d3
  bool lowfreq_worst_in_dict{false};  // m1 > m2 and m1 > m3
  bool phase_ratio_smaller{false};  // m3/m2 < d3/d2
  bool all_hold() const {
    return direct_increasing && lowfreq_worst_in_dict && phase_ratio_smaller;
  }
};

DictDemoReport run_dict_demo(const DictDemoConfig& cfg);

}  // namespace eegx
