#include "eegx/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "eegx/signal_io.hpp"
#include "eegx/util.hpp"

namespace eegx {

namespace {

constexpr real kTwoPi = real(2) * std::numbers::pi_v<real>;

struct Projector {
  std::vector<real> gains;  // one per channel
};

Projector project_gains(const std::vector<ElectrodePosition>& channels, real su,
                        real sv, real sigma) {
  Projector p;
  p.gains.reserve(channels.size());
  for (const auto& ch : channels) {
    const real du = ch.u - su, dv = ch.v - sv;
    p.gains.push_back(std::exp(-(du * du + dv * dv) / (sigma * sigma)));
  }
  return p;
}

void add_projected(RawRecording& rec, const Projector& p,
                   const std::vector<real>& source) {
  for (int c = 0; c < rec.channels(); ++c) {
    const real g = p.gains[static_cast<std::size_t>(c)];
    if (g < real(1e-6)) continue;
    real* dst = rec.channel(c);
    for (long t = 0; t < rec.length; ++t) dst[t] += g * source[static_cast<std::size_t>(t)];
  }
}

std::vector<real> sinusoid(long L, real fs, real amp, real hz, real phase) {
  std::vector<real> s(static_cast<std::size_t>(L));
  for (long t = 0; t < L; ++t)
    s[static_cast<std::size_t>(t)] = amp * std::sin(kTwoPi * hz * static_cast<real>(t) / fs + phase);
  return s;
}

}  // namespace

std::vector<LabeledRecording> generate(const SynthSpec& spec, int count,
                                       const Atlas& atlas) {
  if (spec.montage.empty()) throw std::invalid_argument("synth: empty montage");
  if (spec.classes.empty()) throw std::invalid_argument("synth: no classes");
  if (count < 1) throw std::invalid_argument("synth: count must be >= 1");
  const long L = spec.samples();
  if (L < 2) throw std::invalid_argument("synth: recording too short");

  std::vector<ElectrodePosition> chan_pos;
  for (const auto& name : spec.montage) chan_pos.push_back(atlas.lookup(name));
  // source positions named in class specs resolve once up front
  for (const auto& cls : spec.classes)
    for (const auto& src : cls.sources) (void)atlas.lookup(src.electrode);

  const int n_classes = static_cast<int>(spec.classes.size());
  std::vector<LabeledRecording> out;
  out.reserve(static_cast<std::size_t>(count));

  for (int idx = 0; idx < count; ++idx) {
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(idx)));
    std::uniform_real_distribution<real> uphase(real(0), kTwoPi);
    std::uniform_real_distribution<real> unit(real(0), real(1));

    LabeledRecording rec;
    rec.label = idx % n_classes;
    rec.clean.channel_names = spec.montage;
    rec.clean.length = L;
    rec.clean.sample_rate = spec.sample_rate;
    rec.clean.samples.assign(static_cast<std::size_t>(spec.montage.size()) * static_cast<std::size_t>(L), real(0));

    // class sources
    const auto& cls = spec.classes[static_cast<std::size_t>(rec.label)];
    for (const auto& src : cls.sources) {
      const auto& pos = atlas.lookup(src.electrode);
      const real jitter =
          real(1) + spec.amplitude_jitter * (real(2) * unit(rng) - real(1));
      const auto wave = sinusoid(L, spec.sample_rate, src.amp * jitter,
                                 src.freq_hz, uphase(rng));
      add_projected(rec.clean, project_gains(chan_pos, pos.u, pos.v, spec.source_sigma),
                    wave);
    }

    // class-independent background activity at random scalp spots
    for (int b = 0; b < spec.background_sources; ++b) {
      const real ang = uphase(rng);
      const real rad = std::sqrt(unit(rng)) * real(0.9);
      const real su = rad * std::cos(ang), sv = rad * std::sin(ang);
      std::vector<real> wave(static_cast<std::size_t>(L), real(0));
      for (int h = 0; h < 3; ++h) {
        const real hz = real(1) + unit(rng) * real(29);
        const real amp = spec.background_amp * (real(0.3) + real(0.7) * unit(rng));
        const real ph = uphase(rng);
        for (long t = 0; t < L; ++t)
          wave[static_cast<std::size_t>(t)] += amp * std::sin(kTwoPi * hz * static_cast<real>(t) / spec.sample_rate + ph);
      }
      add_projected(rec.clean, project_gains(chan_pos, su, sv, spec.source_sigma), wave);
    }

    // artifacts on top of the stored clean signal
    rec.noisy = rec.clean;
    const auto& art = spec.artifacts;
    if (art.blink_rate > real(0)) {
      const auto& fpz = atlas.lookup("Fpz");
      const auto gains = project_gains(chan_pos, fpz.u, fpz.v, real(0.35));
      std::poisson_distribution<int> nblink(
          static_cast<double>(art.blink_rate * spec.duration_s));
      const int blinks = nblink(rng);
      for (int bi = 0; bi < blinks; ++bi) {
        const long t0 = static_cast<long>(unit(rng) * static_cast<real>(L));
        const real width = real(0.12) * spec.sample_rate;  // ~120 ms lobe
        const real amp = real(40) + real(40) * unit(rng);
        for (long t = std::max<long>(0, t0 - static_cast<long>(4 * width));
             t < std::min<long>(L, t0 + static_cast<long>(4 * width)); ++t) {
          const real z = (static_cast<real>(t - t0)) / width;
          const real pulse = amp * z * std::exp(real(-0.5) * z * z);  // biphasic
          for (int c = 0; c < rec.noisy.channels(); ++c)
            rec.noisy.channel(c)[t] += gains.gains[static_cast<std::size_t>(c)] * pulse;
        }
      }
    }
    if (art.line_amp > real(0)) {
      const real ph = uphase(rng);
      for (int c = 0; c < rec.noisy.channels(); ++c) {
        const real g = real(0.8) + real(0.4) * unit(rng);
        real* dst = rec.noisy.channel(c);
        for (long t = 0; t < L; ++t)
          dst[t] += art.line_amp * g *
                    std::sin(kTwoPi * art.line_hz * static_cast<real>(t) / spec.sample_rate + ph);
      }
    }
    if (art.muscle_amp > real(0)) {
      const auto& t7 = atlas.lookup("T7");
      const auto& t8 = atlas.lookup("T8");
      const auto gl = project_gains(chan_pos, t7.u, t7.v, real(0.3));
      const auto gr = project_gains(chan_pos, t8.u, t8.v, real(0.3));
      std::poisson_distribution<int> nburst(static_cast<double>(spec.duration_s));
      std::normal_distribution<real> noise(real(0), real(1));
      const int bursts = nburst(rng);
      for (int bi = 0; bi < bursts; ++bi) {
        const long t0 = static_cast<long>(unit(rng) * static_cast<real>(L));
        const long blen = static_cast<long>((real(0.2) + real(0.3) * unit(rng)) * spec.sample_rate);
        const bool left = unit(rng) < real(0.5);
        const auto& gains = left ? gl : gr;
        for (long t = t0; t < std::min<long>(L, t0 + blen); ++t) {
          const real env = std::sin(kTwoPi * real(0.5) * static_cast<real>(t - t0) / static_cast<real>(blen));
          const real v = art.muscle_amp * env * noise(rng);
          for (int c = 0; c < rec.noisy.channels(); ++c)
            rec.noisy.channel(c)[t] += gains.gains[static_cast<std::size_t>(c)] * v;
        }
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::pair<std::vector<LabeledRecording>, std::vector<LabeledRecording>>
split_stratified(const std::vector<LabeledRecording>& data, real train_frac,
                 std::uint64_t seed) {
  if (!(train_frac > real(0) && train_frac < real(1)))
    throw std::invalid_argument("split: train fraction must lie in (0, 1)");
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < data.size(); ++i)
    by_label[data[i].label].push_back(i);
  std::vector<LabeledRecording> train, test;
  Rng rng(derive_seed(seed, 0x73706c6974ull));
  for (auto& [label, idxs] : by_label) {
    if (idxs.size() < 2)
      throw std::invalid_argument("split: class " + std::to_string(label) +
                                  " has fewer than 2 samples");
    std::shuffle(idxs.begin(), idxs.end(), rng);
    const std::size_t n_train = static_cast<std::size_t>(
        std::lround(static_cast<double>(train_frac) * static_cast<double>(idxs.size())));
    for (std::size_t i = 0; i < idxs.size(); ++i)
      (i < n_train ? train : test).push_back(data[idxs[i]]);
  }
  return {std::move(train), std::move(test)};
}

std::vector<std::string> montage_tuh19() {
  return {"Fp1", "Fp2", "F3", "F4", "C3", "C4", "P3", "P4", "O1", "O2",
          "F7", "F8", "T7", "T8", "P6", "P5", "Fz", "Cz", "Pz"};
}

std::vector<std::string> montage_emotiv14() {
  return {"AF3", "F7", "F3", "FC5", "T7", "P7", "O1",
          "O2", "P8", "T8", "FC6", "F4", "AF4", "F8"};
}

std::vector<std::string> montage_bci22() {
  return {"Fz", "FC3", "FC1", "FCz", "FC2", "FC4", "C5", "C3", "C1", "Cz", "C2",
          "C4", "C6", "CP3", "CP1", "CPz", "CP2", "CP4", "P1", "Pz", "P2", "POz"};
}

std::vector<std::string> montage_occipital8() {
  return {"Pz", "PO7", "PO3", "POz", "PO4", "PO8", "O1", "O2"};
}

SynthSpec standard_task_spec(std::vector<std::string> montage,
                             std::uint64_t seed) {
  SynthSpec spec;
  spec.montage = std::move(montage);
  spec.sample_rate = 128;
  spec.duration_s = 2;
  spec.classes = {
      {"left_po_alpha", {{"PO7", real(10), real(3)}}},
      {"right_po_alpha", {{"PO8", real(10), real(3)}}},
  };
  spec.artifacts.blink_rate = real(0.5);
  spec.artifacts.line_amp = real(2);
  spec.artifacts.muscle_amp = real(3);
  spec.background_amp = real(1);
  spec.amplitude_jitter = real(0.5);
  spec.seed = seed;
  return spec;
}

void write_dataset(const std::string& dir,
                   const std::vector<LabeledRecording>& data) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream labels(dir + "/labels.csv");
  if (!labels) throw std::runtime_error("dataset: cannot write " + dir + "/labels.csv");
  labels << "index,label,clean_path,noisy_path\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::ostringstream base;
    base << "rec_" << i;
    const std::string clean_rel = base.str() + "_clean.sig";
    const std::string noisy_rel = base.str() + "_noisy.sig";
    write_signal(dir + "/" + clean_rel, data[i].clean);
    write_signal(dir + "/" + noisy_rel, data[i].noisy);
    labels << i << "," << data[i].label << "," << clean_rel << "," << noisy_rel
           << "\n";
  }
}

std::vector<LabeledRecording> read_dataset(const std::string& dir) {
  std::ifstream labels(dir + "/labels.csv");
  if (!labels) throw std::runtime_error("dataset: cannot open " + dir + "/labels.csv");
  std::string line;
  if (!std::getline(labels, line))
    throw std::runtime_error("dataset: empty labels.csv in " + dir);
  std::vector<LabeledRecording> out;
  while (std::getline(labels, line)) {
    if (trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string idx, label, clean_rel, noisy_rel;
    if (!std::getline(ss, idx, ',') || !std::getline(ss, label, ',') ||
        !std::getline(ss, clean_rel, ',') || !std::getline(ss, noisy_rel, ','))
      throw std::runtime_error("dataset: malformed labels row '" + line + "'");
    LabeledRecording rec;
    rec.label = std::stoi(label);
    rec.clean = read_signal(dir + "/" + trim(clean_rel));
    rec.noisy = read_signal(dir + "/" + trim(noisy_rel));
    out.push_back(std::move(rec));
  }
  if (out.empty()) throw std::runtime_error("dataset: no rows in " + dir);
  return out;
}

}  // namespace eegx
