#pragma once

// Frozen-representation evaluation: multinomial logistic probe and the
// classification metrics reported with it.

#include <vector>

#include "eegx/recording.hpp"
#include "eegx/tensor.hpp"

namespace eegx {

struct ProbeReport {
  real balanced_accuracy{0};        // mean of per-class recalls
  real auroc{0};                    // binary tasks only, 0 otherwise
  real weighted_f1{0};              // support-weighted mean of per-class F1
  std::vector<real> per_class_recall;
  std::vector<std::vector<long>> confusion;  // [true][predicted]
  int classes{0};
};

struct ProbeConfig {
  int iterations{800};
  real lr{real(0.1)};
  real l2{real(1e-4)};
};

// Trains a multinomial logistic classifier by full-batch gradient descent on
// standardized features and evaluates on the test split. Deterministic
// (zero initialization). Throws when the training split has one class.
ProbeReport probe(const std::vector<std::vector<real>>& train_features,
                  const std::vector<int>& train_labels,
                  const std::vector<std::vector<real>>& test_features,
                  const std::vector<int>& test_labels,
                  const ProbeConfig& cfg = {});

// Metric helpers (exposed for tests and reports).
real balanced_accuracy_from_confusion(const std::vector<std::vector<long>>& cm);
real weighted_f1_from_confusion(const std::vector<std::vector<long>>& cm);
// Mann-Whitney AUROC with tie correction; labels in {0,1}, higher score
// favors class 1.
real auroc_binary(const std::vector<real>& scores, const std::vector<int>& labels);

// Spearman rank correlation (average ranks on ties).
real spearman(const std::vector<real>& a, const std::vector<real>& b);

// Per-channel log band powers (delta/theta/alpha/beta), the input of the
// band-power sanity baseline.
std::vector<real> bandpower_features(const RawRecording& rec);

}  // namespace eegx
