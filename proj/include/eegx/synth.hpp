#pragma once

// Deterministic synthetic EEG with spatially coherent sources. Latent
// dipole-like sources sit at named scalp locations and project to electrodes
// with a gain decaying in atlas distance, so neighboring channels correlate.
// Class structure places narrowband sources in class-specific regions;
// artifacts (blinks, line hum, muscle bursts) are injected on top of the
// stored clean signal.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "eegx/atlas.hpp"
#include "eegx/recording.hpp"

namespace eegx {

struct SourceSpec {
  std::string electrode;  // atlas name giving the source location
  real freq_hz{10};
  real amp{1};
};

struct ClassSpec {
  std::string name;
  std::vector<SourceSpec> sources;
};

struct ArtifactMix {
  real blink_rate{0};   // expected blinks per second
  real line_amp{0};     // mains-hum amplitude
  real muscle_amp{0};   // temporal-region burst amplitude
  real line_hz{50};
};

struct SynthSpec {
  std::vector<std::string> montage;
  real sample_rate{128};
  real duration_s{2};
  std::vector<ClassSpec> classes;
  ArtifactMix artifacts;
  real background_amp{real(1)};     // class-independent coherent sources
  int background_sources{6};
  real amplitude_jitter{real(0.5)}; // per-recording gain spread
  real source_sigma{real(0.25)};    // projection gain length scale
  std::uint64_t seed{0};

  long samples() const { return static_cast<long>(sample_rate * duration_s); }
};

struct LabeledRecording {
  RawRecording clean;
  RawRecording noisy;
  int label{0};
};

// Deterministic per (spec.seed, index); labels cycle through classes so
// counts stay balanced.
std::vector<LabeledRecording> generate(const SynthSpec& spec, int count,
                                       const Atlas& atlas);

// Disjoint, exhaustive, label-stratified, deterministic split.
std::pair<std::vector<LabeledRecording>, std::vector<LabeledRecording>>
split_stratified(const std::vector<LabeledRecording>& data, real train_frac,
                 std::uint64_t seed);

// Montage presets mirroring common headset layouts.
std::vector<std::string> montage_tuh19();
std::vector<std::string> montage_emotiv14();
std::vector<std::string> montage_bci22();
std::vector<std::string> montage_occipital8();

// The standard two-class task used by the evaluation pipeline: a 10 Hz
// source in the left vs right parieto-occipital region under amplitude
// jitter, background activity, and all three artifact kinds.
SynthSpec standard_task_spec(std::vector<std::string> montage,
                             std::uint64_t seed);

// Dataset directory: one signal file per clean/noisy pair plus labels.csv
// rows "index,label,clean_path,noisy_path".
void write_dataset(const std::string& dir,
                   const std::vector<LabeledRecording>& data);
std::vector<LabeledRecording> read_dataset(const std::string& dir);

}  // namespace eegx
