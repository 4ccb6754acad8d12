#include "eegx/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "eegx/dsp.hpp"

namespace eegx {

namespace {

std::vector<real> ranks(const std::vector<real>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<real> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const real avg = (static_cast<real>(i) + static_cast<real>(j)) / real(2) + real(1);
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

real spearman(const std::vector<real>& a, const std::vector<real>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("spearman: need two equal-length series");
  const auto ra = ranks(a), rb = ranks(b);
  const real n = static_cast<real>(a.size());
  real ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  real num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

real auroc_binary(const std::vector<real>& scores,
                  const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("auroc: mismatched inputs");
  long n_pos = 0, n_neg = 0;
  for (int l : labels) (l == 1 ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auroc: needs both classes present");
  const auto r = ranks(scores);
  real rank_sum_pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == 1) rank_sum_pos += r[i];
  const real u = rank_sum_pos - static_cast<real>(n_pos) * (static_cast<real>(n_pos) + 1) / real(2);
  return u / (static_cast<real>(n_pos) * static_cast<real>(n_neg));
}

real balanced_accuracy_from_confusion(const std::vector<std::vector<long>>& cm) {
  real sum = 0;
  int counted = 0;
  for (std::size_t k = 0; k < cm.size(); ++k) {
    long support = 0;
    for (long v : cm[k]) support += v;
    if (support == 0) continue;
    sum += static_cast<real>(cm[k][k]) / static_cast<real>(support);
    ++counted;
  }
  return counted ? sum / static_cast<real>(counted) : real(0);
}

real weighted_f1_from_confusion(const std::vector<std::vector<long>>& cm) {
  const std::size_t K = cm.size();
  long total = 0;
  real f1_sum = 0;
  for (std::size_t k = 0; k < K; ++k) {
    long support = 0, predicted = 0;
    for (std::size_t j = 0; j < K; ++j) {
      support += cm[k][j];
      predicted += cm[j][k];
    }
    total += support;
    const long tp = cm[k][k];
    if (support == 0) continue;
    const real prec = predicted ? static_cast<real>(tp) / static_cast<real>(predicted) : real(0);
    const real rec = static_cast<real>(tp) / static_cast<real>(support);
    const real f1 = (prec + rec) > real(0) ? real(2) * prec * rec / (prec + rec) : real(0);
    f1_sum += f1 * static_cast<real>(support);
  }
  return total ? f1_sum / static_cast<real>(total) : real(0);
}

ProbeReport probe(const std::vector<std::vector<real>>& train_features,
                  const std::vector<int>& train_labels,
                  const std::vector<std::vector<real>>& test_features,
                  const std::vector<int>& test_labels, const ProbeConfig& cfg) {
  if (train_features.empty() || train_features.size() != train_labels.size())
    throw std::invalid_argument("probe: bad training inputs");
  if (test_features.empty() || test_features.size() != test_labels.size())
    throw std::invalid_argument("probe: bad test inputs");
  const std::size_t D = train_features[0].size();
  for (const auto& f : train_features)
    if (f.size() != D) throw std::invalid_argument("probe: ragged features");
  for (const auto& f : test_features)
    if (f.size() != D)
      throw std::invalid_argument("probe: train/test feature width mismatch");

  std::set<int> label_set(train_labels.begin(), train_labels.end());
  const int K = label_set.empty() ? 0 : *label_set.rbegin() + 1;
  if (label_set.size() < 2)
    throw std::invalid_argument("probe: training split has a single class");

  // standardize with training statistics
  std::vector<real> mu(D, real(0)), sd(D, real(0));
  for (const auto& f : train_features)
    for (std::size_t j = 0; j < D; ++j) mu[j] += f[j];
  for (auto& v : mu) v /= static_cast<real>(train_features.size());
  for (const auto& f : train_features)
    for (std::size_t j = 0; j < D; ++j) sd[j] += (f[j] - mu[j]) * (f[j] - mu[j]);
  for (auto& v : sd) {
    v = std::sqrt(v / static_cast<real>(train_features.size()));
    if (v < real(1e-9)) v = real(1);
  }
  auto standardized = [&](const std::vector<std::vector<real>>& rows) {
    std::vector<std::vector<real>> out(rows.size(), std::vector<real>(D));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < D; ++j) out[i][j] = (rows[i][j] - mu[j]) / sd[j];
    return out;
  };
  const auto Xtr = standardized(train_features);
  const auto Xte = standardized(test_features);

  // multinomial logistic regression, full-batch gradient descent
  std::vector<real> W(D * static_cast<std::size_t>(K), real(0)), b(static_cast<std::size_t>(K), real(0));
  const std::size_t N = Xtr.size();
  std::vector<real> logits(static_cast<std::size_t>(K));
  std::vector<real> gW(W.size()), gb(b.size());
  for (int it = 0; it < cfg.iterations; ++it) {
    std::fill(gW.begin(), gW.end(), real(0));
    std::fill(gb.begin(), gb.end(), real(0));
    for (std::size_t i = 0; i < N; ++i) {
      real mx = -std::numeric_limits<real>::infinity();
      for (int k = 0; k < K; ++k) {
        real z = b[static_cast<std::size_t>(k)];
        for (std::size_t j = 0; j < D; ++j) z += Xtr[i][j] * W[j * static_cast<std::size_t>(K) + static_cast<std::size_t>(k)];
        logits[static_cast<std::size_t>(k)] = z;
        mx = std::max(mx, z);
      }
      real denom = 0;
      for (int k = 0; k < K; ++k) {
        logits[static_cast<std::size_t>(k)] = std::exp(logits[static_cast<std::size_t>(k)] - mx);
        denom += logits[static_cast<std::size_t>(k)];
      }
      for (int k = 0; k < K; ++k) {
        const real p = logits[static_cast<std::size_t>(k)] / denom;
        const real err = p - (train_labels[i] == k ? real(1) : real(0));
        gb[static_cast<std::size_t>(k)] += err;
        for (std::size_t j = 0; j < D; ++j)
          gW[j * static_cast<std::size_t>(K) + static_cast<std::size_t>(k)] += err * Xtr[i][j];
      }
    }
    const real step = cfg.lr / static_cast<real>(N);
    for (std::size_t j = 0; j < W.size(); ++j)
      W[j] -= step * (gW[j] + cfg.l2 * static_cast<real>(N) * W[j]);
    for (std::size_t k = 0; k < b.size(); ++k) b[k] -= step * gb[k];
  }

  ProbeReport rep;
  rep.classes = K;
  rep.confusion.assign(static_cast<std::size_t>(K), std::vector<long>(static_cast<std::size_t>(K), 0));
  std::vector<real> scores;  // class-1 probability for binary AUROC
  for (std::size_t i = 0; i < Xte.size(); ++i) {
    real mx = -std::numeric_limits<real>::infinity();
    for (int k = 0; k < K; ++k) {
      real z = b[static_cast<std::size_t>(k)];
      for (std::size_t j = 0; j < D; ++j) z += Xte[i][j] * W[j * static_cast<std::size_t>(K) + static_cast<std::size_t>(k)];
      logits[static_cast<std::size_t>(k)] = z;
      mx = std::max(mx, z);
    }
    real denom = 0;
    for (int k = 0; k < K; ++k) {
      logits[static_cast<std::size_t>(k)] = std::exp(logits[static_cast<std::size_t>(k)] - mx);
      denom += logits[static_cast<std::size_t>(k)];
    }
    int best = 0;
    for (int k = 1; k < K; ++k)
      if (logits[static_cast<std::size_t>(k)] > logits[static_cast<std::size_t>(best)]) best = k;
    if (K == 2) scores.push_back(logits[1] / denom);
    const int truth = test_labels[i];
    if (truth < 0 || truth >= K)
      throw std::invalid_argument("probe: test label outside training classes");
    rep.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(best)] += 1;
  }
  rep.balanced_accuracy = balanced_accuracy_from_confusion(rep.confusion);
  rep.weighted_f1 = weighted_f1_from_confusion(rep.confusion);
  rep.per_class_recall.resize(static_cast<std::size_t>(K), real(0));
  for (int k = 0; k < K; ++k) {
    long support = 0;
    for (long v : rep.confusion[static_cast<std::size_t>(k)]) support += v;
    if (support)
      rep.per_class_recall[static_cast<std::size_t>(k)] =
          static_cast<real>(rep.confusion[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)]) / static_cast<real>(support);
  }
  if (K == 2) {
    bool both = false;
    for (int l : test_labels)
      if (l == 0) both = true;
    bool any1 = false;
    for (int l : test_labels)
      if (l == 1) any1 = true;
    if (both && any1) rep.auroc = auroc_binary(scores, test_labels);
  }
  return rep;
}

std::vector<real> bandpower_features(const RawRecording& rec) {
  rec.validate();
  static const real bands[4][2] = {{1, 4}, {4, 8}, {8, 13}, {13, 30}};
  const int n = static_cast<int>(rec.length);
  std::vector<real> out;
  out.reserve(static_cast<std::size_t>(rec.channels()) * 4);
  for (int c = 0; c < rec.channels(); ++c) {
    const auto mag = frame_magnitude(rec.channel(c), n, /*hann=*/true);
    const real hz_per_bin = rec.sample_rate / static_cast<real>(n);
    for (const auto& band : bands) {
      real power = 0;
      for (std::size_t k = 0; k < mag.size(); ++k) {
        const real hz = static_cast<real>(k) * hz_per_bin;
        if (hz >= band[0] && hz < band[1]) power += mag[k] * mag[k];
      }
      out.push_back(std::log(power + real(1e-12)));
    }
  }
  return out;
}

}  // namespace eegx
