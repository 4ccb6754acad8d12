#include "eegx/denoise.hpp"

#include <algorithm>
#include <stdexcept>

#include "eegx/dsp.hpp"
#include "eegx/util.hpp"

namespace eegx {

DenoiserKind denoiser_kind_from_string(const std::string& s) {
  const std::string k = lower(trim(s));
  if (k == "oracle") return DenoiserKind::oracle;
  if (k == "spectral") return DenoiserKind::spectral;
  if (k == "identity") return DenoiserKind::identity;
  throw std::invalid_argument("denoiser kind must be oracle|spectral|identity, got '" + s + "'");
}

std::string to_string(DenoiserKind k) {
  switch (k) {
    case DenoiserKind::oracle: return "oracle";
    case DenoiserKind::spectral: return "spectral";
    case DenoiserKind::identity: return "identity";
  }
  return "?";
}

RawRecording denoise(const RawRecording& rec, const DenoiserSpec& spec,
                     const RawRecording* oracle_clean) {
  rec.validate();
  switch (spec.kind) {
    case DenoiserKind::identity:
      return rec;
    case DenoiserKind::oracle: {
      if (!oracle_clean)
        throw std::invalid_argument("denoise: oracle kind needs the stored clean signal");
      if (oracle_clean->channels() != rec.channels() ||
          oracle_clean->length != rec.length)
        throw std::invalid_argument(
            "denoise: oracle clean shape " +
            std::to_string(oracle_clean->channels()) + "x" +
            std::to_string(oracle_clean->length) + " does not match input " +
            std::to_string(rec.channels()) + "x" + std::to_string(rec.length));
      return *oracle_clean;
    }
    case DenoiserKind::spectral: {
      const real nyquist = rec.sample_rate / real(2);
      if (spec.band_low_hz <= real(0) || spec.band_high_hz <= spec.band_low_hz ||
          spec.band_high_hz >= nyquist)
        throw std::invalid_argument("denoise: band edges must satisfy 0 < low < high < Nyquist");
      auto sections = butterworth_highpass(spec.filter_order, spec.band_low_hz,
                                           rec.sample_rate);
      auto lp = butterworth_lowpass(spec.filter_order, spec.band_high_hz,
                                    rec.sample_rate);
      sections.insert(sections.end(), lp.begin(), lp.end());
      if (spec.notch_hz > real(0)) {
        if (spec.notch_hz >= nyquist)
          throw std::invalid_argument("denoise: notch frequency must lie below Nyquist");
        sections.push_back(notch(spec.notch_hz, spec.notch_q, rec.sample_rate));
      }
      // pad past the longest impulse-response tail: the sub-Hz high-pass and
      // the narrow notch both ring for several of their periods
      real tail_s = real(3) / spec.band_low_hz;
      if (spec.notch_hz > real(0))
        tail_s = std::max(tail_s, real(3) * spec.notch_q / spec.notch_hz);
      const long pad = static_cast<long>(tail_s * rec.sample_rate);
      RawRecording out = rec;
      std::vector<real> x(static_cast<std::size_t>(rec.length));
      for (int c = 0; c < rec.channels(); ++c) {
        const real* src = rec.channel(c);
        x.assign(src, src + rec.length);
        const auto y = filtfilt(sections, x, pad);
        real* dst = out.channel(c);
        for (long t = 0; t < rec.length; ++t) dst[static_cast<std::size_t>(t)] = y[static_cast<std::size_t>(t)];
      }
      return out;
    }
  }
  throw std::logic_error("denoise: unreachable");
}

}  // namespace eegx
