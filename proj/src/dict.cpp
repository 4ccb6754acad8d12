#include "eegx/dict.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "eegx/util.hpp"

namespace eegx {

DiCTDictionary build_dictionary(int groups, int kernels_per_group,
                                int kernel_length, long signal_length,
                                std::uint64_t seed) {
  if (groups < 1 || kernels_per_group < 1)
    throw std::invalid_argument("dictionary: groups and kernels must be >= 1");
  if (kernel_length < 1 || kernel_length % 2 == 0)
    throw std::invalid_argument("dictionary: kernel length must be odd");
  if (static_cast<long>(kernel_length) > signal_length)
    throw std::invalid_argument("dictionary: kernel length " +
                                std::to_string(kernel_length) +
                                " exceeds signal length " +
                                std::to_string(signal_length));
  DiCTDictionary d;
  d.groups = groups;
  d.kernels_per_group = kernels_per_group;
  d.kernel_length = kernel_length;
  d.design_length = signal_length;
  d.seed = seed;
  for (long dil = 1; (kernel_length - 1) * dil + 1 <= signal_length; dil *= 2)
    d.dilations.push_back(static_cast<int>(dil));

  Rng rng(derive_seed(seed, 0x64696374ull));
  std::normal_distribution<real> normal(real(0), real(1));
  const std::size_t n_kernels =
      static_cast<std::size_t>(groups) * static_cast<std::size_t>(kernels_per_group);
  d.weights.resize(n_kernels * static_cast<std::size_t>(kernel_length));
  for (std::size_t ki = 0; ki < n_kernels; ++ki) {
    real* w = d.weights.data() + ki * static_cast<std::size_t>(kernel_length);
    real mu = 0;
    for (int j = 0; j < kernel_length; ++j) {
      w[j] = normal(rng);
      mu += w[j];
    }
    mu /= static_cast<real>(kernel_length);
    for (int j = 0; j < kernel_length; ++j) w[j] -= mu;
  }
  return d;
}

namespace {

struct WinnerRecord {
  // per (channel, dilation, group, t): winning kernel of each pathway
  std::vector<std::uint8_t> kmax, kmin;
};

// Computes both readouts and records winners for the backward pass.
void transform_channel(const real* x, long L, const DiCTDictionary& dict,
                       real* soft, real* hard, std::uint8_t* kmax_out,
                       std::uint8_t* kmin_out) {
  const int G = dict.groups, K = dict.kernels_per_group, klen = dict.kernel_length;
  const int nd = static_cast<int>(dict.dilations.size());
  const int c0 = (klen - 1) / 2;
  std::vector<real> resp(static_cast<std::size_t>(K) * static_cast<std::size_t>(L));
  const real invL = real(1) / static_cast<real>(L);
  for (int di = 0; di < nd; ++di) {
    const int dil = dict.dilations[static_cast<std::size_t>(di)];
    for (int g = 0; g < G; ++g) {
      // responses of the K competing kernels ("same" zero-padded correlation)
      std::fill(resp.begin(), resp.end(), real(0));
      for (int k = 0; k < K; ++k) {
        const real* w = dict.kernel(g, k);
        real* r = resp.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(L);
        for (int j = 0; j < klen; ++j) {
          const long shift = static_cast<long>(j - c0) * dil;
          const real wv = w[j];
          const long t0 = shift < 0 ? -shift : 0;
          const long t1 = shift > 0 ? L - shift : L;
          const real* xs = x + shift;
          for (long t = t0; t < t1; ++t) r[t] += wv * xs[t];
        }
      }
      std::uint8_t* km = kmax_out + (static_cast<std::size_t>(di) * G + g) * static_cast<std::size_t>(L);
      std::uint8_t* kn = kmin_out + (static_cast<std::size_t>(di) * G + g) * static_cast<std::size_t>(L);
      // feature layout per channel: [g][k][di][pathway]
      for (long t = 0; t < L; ++t) {
        int bmax = 0, bmin = 0;
        real vmax = resp[static_cast<std::size_t>(t)], vmin = vmax;
        for (int k = 1; k < K; ++k) {
          const real v = resp[static_cast<std::size_t>(k) * static_cast<std::size_t>(L) + static_cast<std::size_t>(t)];
          if (v > vmax) {
            vmax = v;
            bmax = k;
          }
          if (v < vmin) {
            vmin = v;
            bmin = k;
          }
        }
        km[t] = static_cast<std::uint8_t>(bmax);
        kn[t] = static_cast<std::uint8_t>(bmin);
        const std::size_t base_max =
            ((static_cast<std::size_t>(g) * K + static_cast<std::size_t>(bmax)) * static_cast<std::size_t>(nd) +
             static_cast<std::size_t>(di)) * 2;
        const std::size_t base_min =
            ((static_cast<std::size_t>(g) * K + static_cast<std::size_t>(bmin)) * static_cast<std::size_t>(nd) +
             static_cast<std::size_t>(di)) * 2;
        soft[base_max + 0] += vmax * invL;
        soft[base_min + 1] += vmin * invL;
        if (hard) {
          hard[base_max + 0] += invL;
          hard[base_min + 1] += invL;
        }
      }
    }
  }
}

}  // namespace

Tensor dict_transform(const Tensor& x, const DiCTDictionary& dict) {
  if (x.ndim() != 2)
    throw std::invalid_argument("dict_transform: expected [channels, length]");
  const int C = x.dim(0);
  const long L = x.dim(1);
  if (L > dict.design_length)
    throw std::invalid_argument("dict_transform: signal length " +
                                std::to_string(L) +
                                " exceeds dictionary design length " +
                                std::to_string(dict.design_length));
  if (static_cast<long>(dict.kernel_length) > L)
    throw std::invalid_argument("dict_transform: signal shorter than kernel");
  const int F = dict.feature_length();
  const int nd = static_cast<int>(dict.dilations.size());
  const int G = dict.groups;

  std::vector<real> soft(static_cast<std::size_t>(C) * static_cast<std::size_t>(F), real(0));
  auto kmax = std::make_shared<std::vector<std::uint8_t>>(
      static_cast<std::size_t>(C) * nd * G * static_cast<std::size_t>(L));
  auto kmin = std::make_shared<std::vector<std::uint8_t>>(kmax->size());

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int c = 0; c < C; ++c) {
    transform_channel(
        x.data().data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(L), L, dict,
        soft.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(F), nullptr,
        kmax->data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(nd) * G * static_cast<std::size_t>(L),
        kmin->data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(nd) * G * static_cast<std::size_t>(L));
  }

  auto xn = x.node_ptr();
  if (!xn) return Tensor::constant({C, F}, std::move(soft));

  const int K = dict.kernels_per_group;
  const int klen = dict.kernel_length;
  const int c0 = (klen - 1) / 2;
  auto dils = dict.dilations;
  auto wts = std::make_shared<std::vector<real>>(dict.weights);
  return make_op_tensor(
      {C, F}, std::move(soft), {xn},
      [xn, kmax, kmin, wts, dils, C, L, F, G, K, klen, c0, nd](const std::vector<real>& g) {
        auto& gx = xn->ensure_grad();
        const real invL = real(1) / static_cast<real>(L);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int c = 0; c < C; ++c) {
          real* gxc = gx.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(L);
          const real* gc = g.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(F);
          for (int di = 0; di < nd; ++di) {
            const int dil = dils[static_cast<std::size_t>(di)];
            for (int gi = 0; gi < G; ++gi) {
              const std::uint8_t* km =
                  kmax->data() + ((static_cast<std::size_t>(c) * nd + di) * G + gi) * static_cast<std::size_t>(L);
              const std::uint8_t* kn =
                  kmin->data() + ((static_cast<std::size_t>(c) * nd + di) * G + gi) * static_cast<std::size_t>(L);
              for (long t = 0; t < L; ++t) {
                const int kwin_max = km[t];
                const int kwin_min = kn[t];
                const std::size_t base_max =
                    ((static_cast<std::size_t>(gi) * K + static_cast<std::size_t>(kwin_max)) * static_cast<std::size_t>(nd) +
                     static_cast<std::size_t>(di)) * 2;
                const std::size_t base_min =
                    ((static_cast<std::size_t>(gi) * K + static_cast<std::size_t>(kwin_min)) * static_cast<std::size_t>(nd) +
                     static_cast<std::size_t>(di)) * 2;
                const real gm = gc[base_max + 0] * invL;
                const real gn = gc[base_min + 1] * invL;
                if (gm != real(0)) {
                  const real* w = wts->data() +
                                  (static_cast<std::size_t>(gi) * K + static_cast<std::size_t>(kwin_max)) *
                                      static_cast<std::size_t>(klen);
                  for (int j = 0; j < klen; ++j) {
                    const long s = t + static_cast<long>(j - c0) * dil;
                    if (s >= 0 && s < L) gxc[s] += gm * w[j];
                  }
                }
                if (gn != real(0)) {
                  const real* w = wts->data() +
                                  (static_cast<std::size_t>(gi) * K + static_cast<std::size_t>(kwin_min)) *
                                      static_cast<std::size_t>(klen);
                  for (int j = 0; j < klen; ++j) {
                    const long s = t + static_cast<long>(j - c0) * dil;
                    if (s >= 0 && s < L) gxc[s] += gn * w[j];
                  }
                }
              }
            }
          }
        }
      });
}

std::vector<real> dict_hard_features(const real* x, int channels, long length,
                                     const DiCTDictionary& dict) {
  if (length > dict.design_length)
    throw std::invalid_argument("dict_hard_features: signal length exceeds design length");
  const int F = dict.feature_length();
  const int nd = static_cast<int>(dict.dilations.size());
  std::vector<real> soft(static_cast<std::size_t>(channels) * static_cast<std::size_t>(F), real(0));
  std::vector<real> hard(soft.size(), real(0));
  std::vector<std::uint8_t> kmax(static_cast<std::size_t>(nd) * dict.groups * static_cast<std::size_t>(length));
  std::vector<std::uint8_t> kmin(kmax.size());
  for (int c = 0; c < channels; ++c)
    transform_channel(x + static_cast<std::size_t>(c) * static_cast<std::size_t>(length), length, dict,
                      soft.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(F),
                      hard.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(F),
                      kmax.data(), kmin.data());
  return hard;
}

Tensor dict_loss(const Tensor& clean, const Tensor& decoded,
                 const DiCTDictionary& dict) {
  if (clean.shape() != decoded.shape())
    throw std::invalid_argument("dict_loss: shape mismatch " +
                                shape_str(clean.shape()) + " vs " +
                                shape_str(decoded.shape()));
  Tensor fa = dict_transform(clean, dict);
  Tensor fb = dict_transform(decoded, dict);
  const real norm = real(1) / static_cast<real>(fa.size());
  return scale(squared_l2(sub(fa, fb)), norm);
}

Tensor direct_mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("direct_mse: shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  return scale(squared_l2(sub(a, b)), real(1) / static_cast<real>(a.size()));
}

DictDemoReport run_dict_demo(const DictDemoConfig& cfg) {
  const long L = static_cast<long>(cfg.sample_rate * cfg.duration_s);
  if (L < 8) throw std::invalid_argument("dict demo: signal too short");
  constexpr real kTwoPi = real(2) * std::numbers::pi_v<real>;
  auto wave = [&](real amp, real hz, real phase) {
    std::vector<real> s(static_cast<std::size_t>(L));
    for (long t = 0; t < L; ++t)
      s[static_cast<std::size_t>(t)] =
          amp * std::sin(kTwoPi * hz * static_cast<real>(t) / cfg.sample_rate + phase);
    return s;
  };
  auto add3 = [&](std::vector<real> a, const std::vector<real>& b,
                  const std::vector<real>& c) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i] + c[i];
    return a;
  };

  DictDemoReport rep;
  rep.source = add3(wave(cfg.low_amp, cfg.low_hz, 0), wave(cfg.mid_amp, cfg.mid_hz, 0),
                    wave(cfg.high_amp, cfg.high_hz, 0));
  {
    auto r1 = wave(cfg.low_amp, cfg.low_hz, 0);
    const auto hi = wave(cfg.recon1_high_amp, cfg.high_hz, 0);
    for (std::size_t i = 0; i < r1.size(); ++i) r1[i] += hi[i];
    rep.recon1 = std::move(r1);
  }
  rep.recon2 = add3(wave(cfg.recon2_low_amp, cfg.low_hz, 0),
                    wave(cfg.mid_amp, cfg.mid_hz, 0), wave(cfg.high_amp, cfg.high_hz, 0));
  rep.recon3 = add3(wave(cfg.recon2_low_amp, cfg.low_hz, cfg.phase_shift),
                    wave(cfg.mid_amp, cfg.mid_hz, cfg.phase_shift),
                    wave(cfg.high_amp, cfg.high_hz, cfg.phase_shift));

  auto mse = [](const std::vector<real>& a, const std::vector<real>& b) {
    real s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / static_cast<real>(a.size());
  };
  const std::vector<real>* recons[3] = {&rep.recon1, &rep.recon2, &rep.recon3};
  for (int i = 0; i < 3; ++i) rep.direct_mse[i] = mse(rep.source, *recons[i]);

  const auto dict = build_dictionary(cfg.groups, cfg.kernels_per_group,
                                     cfg.kernel_length, L, cfg.seed);
  const auto f_src = dict_hard_features(rep.source.data(), 1, L, dict);
  for (int i = 0; i < 3; ++i) {
    const auto f = dict_hard_features(recons[i]->data(), 1, L, dict);
    real s = 0;
    for (std::size_t j = 0; j < f.size(); ++j)
      s += (f_src[j] - f[j]) * (f_src[j] - f[j]);
    rep.dict_mse[i] = s / static_cast<real>(f.size());
  }

  rep.direct_increasing = rep.direct_mse[0] < rep.direct_mse[1] &&
                          rep.direct_mse[1] < rep.direct_mse[2];
  rep.lowfreq_worst_in_dict =
      rep.dict_mse[0] > rep.dict_mse[1] && rep.dict_mse[0] > rep.dict_mse[2];
  rep.phase_ratio_smaller = rep.dict_mse[2] / rep.dict_mse[1] <
                            rep.direct_mse[2] / rep.direct_mse[1];
  return rep;
}

}  // namespace eegx
