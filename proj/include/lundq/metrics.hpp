#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lundq/data.hpp"
#include "lundq/models.hpp"

namespace lundq::metrics {

struct ScoredSample {
  double score = 0.0;
  int label = 0;  // 1 = signal, 0 = background
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // classify as signal when score >= threshold
};

struct RocResult {
  std::vector<RocPoint> points;  // one per distinct score, plus the origin
  double auc = 0.0;
};

/// AUC by the Mann-Whitney pair statistic (ties count 1/2), computed through
/// midranks so tied scores are exact. The ROC points integrate to the same
/// number by trapezoid.
RocResult roc_auc(std::span<const ScoredSample> samples);

struct AucEstimate {
  double auc = 0.0;
  double std_error = 0.0;
  std::size_t n_signal = 0;
  std::size_t n_background = 0;
};

/// DeLong placement-based AUC standard error:
///   V10_i = placement of signal i among backgrounds, V01_j vice versa,
///   var = var(V10)/m + var(V01)/n with unbiased sample variances.
AucEstimate delong_variance(std::span<const ScoredSample> samples);

/// Relative transfer gap |native - transferred| / native; native must be > 0.
double transfer_gap(double auc_native, double auc_transferred);

/// One-decimal percent display, truncated toward zero: 0.0046875 -> "0.4%".
std::string truncated_percent(double fraction);

struct SaliencyReport {
  std::vector<double> mean_abs_gradient;  // one entry per flat parameter
  std::vector<std::string> block;         // owning block label per parameter
};

/// Mean absolute logit gradient per parameter over the given records.
/// Reduction is keyed by `ids`, so sample order and worker count never
/// change the result.
SaliencyReport saliency(const models::Model& model,
                        std::span<const data::JetRecord* const> records,
                        std::span<const std::size_t> ids, int threads);

}  // namespace lundq::metrics
