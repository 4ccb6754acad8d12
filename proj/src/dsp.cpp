#include "eegx/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace eegx {

namespace {

constexpr real kPi = std::numbers::pi_v<real>;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

void fft_radix2(std::vector<std::complex<real>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const real ang = real(-2) * kPi / static_cast<real>(len);
    const std::complex<real> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<real> w(1);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const auto u = a[i + j];
        const auto v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

}  // namespace

std::vector<real> frame_magnitude(const real* x, int n, bool hann) {
  if (n < 1) throw std::invalid_argument("frame_magnitude: empty frame");
  std::vector<real> frame(x, x + n);
  if (hann && n > 1) {
    for (int i = 0; i < n; ++i)
      frame[static_cast<std::size_t>(i)] *=
          real(0.5) * (real(1) - std::cos(real(2) * kPi * static_cast<real>(i) / static_cast<real>(n)));
  }
  const int bins = n / 2 + 1;
  std::vector<real> mag(static_cast<std::size_t>(bins));
  if (is_pow2(n)) {
    std::vector<std::complex<real>> a(frame.begin(), frame.end());
    fft_radix2(a);
    for (int k = 0; k < bins; ++k) mag[static_cast<std::size_t>(k)] = std::abs(a[static_cast<std::size_t>(k)]);
  } else {
    for (int k = 0; k < bins; ++k) {
      real re = 0, im = 0;
      for (int t = 0; t < n; ++t) {
        const real ang = real(-2) * kPi * static_cast<real>(k) * static_cast<real>(t) / static_cast<real>(n);
        re += frame[static_cast<std::size_t>(t)] * std::cos(ang);
        im += frame[static_cast<std::size_t>(t)] * std::sin(ang);
      }
      mag[static_cast<std::size_t>(k)] = std::sqrt(re * re + im * im);
    }
  }
  return mag;
}

namespace {

void check_band(real f, real fs, const char* what) {
  if (!(f > real(0)) || f >= fs / real(2))
    throw std::invalid_argument(std::string(what) +
                                " must lie in (0, Nyquist); got " +
                                std::to_string(static_cast<double>(f)) + " Hz at fs " +
                                std::to_string(static_cast<double>(fs)));
}

}  // namespace

std::vector<Biquad> butterworth_lowpass(int order, real cutoff_hz, real fs_hz) {
  if (order < 2 || order % 2 != 0)
    throw std::invalid_argument("butterworth_lowpass: order must be even and >= 2");
  check_band(cutoff_hz, fs_hz, "lowpass cutoff");
  const real w0 = real(2) * kPi * cutoff_hz / fs_hz;
  const real cw = std::cos(w0), sw = std::sin(w0);
  std::vector<Biquad> out;
  const int npairs = order / 2;
  for (int i = 0; i < npairs; ++i) {
    const real theta = kPi * static_cast<real>(2 * i + 1) / static_cast<real>(2 * order);
    const real q = real(1) / (real(2) * std::cos(theta));
    const real alpha = sw / (real(2) * q);
    const real a0 = real(1) + alpha;
    Biquad s;
    s.b0 = (real(1) - cw) / real(2) / a0;
    s.b1 = (real(1) - cw) / a0;
    s.b2 = s.b0;
    s.a1 = real(-2) * cw / a0;
    s.a2 = (real(1) - alpha) / a0;
    out.push_back(s);
  }
  return out;
}

std::vector<Biquad> butterworth_highpass(int order, real cutoff_hz, real fs_hz) {
  if (order < 2 || order % 2 != 0)
    throw std::invalid_argument("butterworth_highpass: order must be even and >= 2");
  check_band(cutoff_hz, fs_hz, "highpass cutoff");
  const real w0 = real(2) * kPi * cutoff_hz / fs_hz;
  const real cw = std::cos(w0), sw = std::sin(w0);
  std::vector<Biquad> out;
  const int npairs = order / 2;
  for (int i = 0; i < npairs; ++i) {
    const real theta = kPi * static_cast<real>(2 * i + 1) / static_cast<real>(2 * order);
    const real q = real(1) / (real(2) * std::cos(theta));
    const real alpha = sw / (real(2) * q);
    const real a0 = real(1) + alpha;
    Biquad s;
    s.b0 = (real(1) + cw) / real(2) / a0;
    s.b1 = -(real(1) + cw) / a0;
    s.b2 = s.b0;
    s.a1 = real(-2) * cw / a0;
    s.a2 = (real(1) - alpha) / a0;
    out.push_back(s);
  }
  return out;
}

Biquad notch(real f0_hz, real q, real fs_hz) {
  check_band(f0_hz, fs_hz, "notch frequency");
  const real w0 = real(2) * kPi * f0_hz / fs_hz;
  const real alpha = std::sin(w0) / (real(2) * q);
  const real a0 = real(1) + alpha;
  Biquad s;
  s.b0 = real(1) / a0;
  s.b1 = real(-2) * std::cos(w0) / a0;
  s.b2 = real(1) / a0;
  s.a1 = real(-2) * std::cos(w0) / a0;
  s.a2 = (real(1) - alpha) / a0;
  return s;
}

namespace {

void run_cascade(const std::vector<Biquad>& sections, std::vector<real>& x) {
  for (const auto& s : sections) {
    // direct form II transposed, state initialized to the step steady state
    // of the first sample so the outer pad edge excites no extra transient
    const real h1 = (s.b0 + s.b1 + s.b2) / (real(1) + s.a1 + s.a2);
    real z1 = (h1 - s.b0) * x.front();
    real z2 = (s.b2 - s.a2 * h1) * x.front();
    for (auto& v : x) {
      const real y = s.b0 * v + z1;
      z1 = s.b1 * v - s.a1 * y + z2;
      z2 = s.b2 * v - s.a2 * y;
      v = y;
    }
  }
}

}  // namespace

std::vector<real> filtfilt(const std::vector<Biquad>& sections,
                           const std::vector<real>& x, long pad_len) {
  const std::size_t L = x.size();
  if (L == 0) return {};
  const std::size_t wanted =
      pad_len >= 0 ? static_cast<std::size_t>(pad_len) : sections.size() * 12 + 12;
  const std::size_t pad = std::min(L - 1, wanted);
  // mirror padding: value-continuous and frequency-preserving at the
  // junctions, so narrow notches stay effective up to the signal edges
  std::vector<real> ext;
  ext.reserve(L + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) ext.push_back(x[pad - i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 0; i < pad; ++i) ext.push_back(x[L - 2 - i]);

  run_cascade(sections, ext);
  std::reverse(ext.begin(), ext.end());
  run_cascade(sections, ext);
  std::reverse(ext.begin(), ext.end());
  return std::vector<real>(ext.begin() + static_cast<std::ptrdiff_t>(pad),
                           ext.begin() + static_cast<std::ptrdiff_t>(pad + L));
}

}  // namespace eegx
