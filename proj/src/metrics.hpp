#pragma once

#include <vector>

#include "volume.hpp"

namespace hepato {

// 2|a n b| / (|a| + |b|); 1.0 when both masks are empty.
double dice(const BinaryMask& a, const BinaryMask& b);

// Mann-Whitney AUC: probability a random positive outscores a random
// negative, ties counted 1/2. Requires both classes present.
double roc_auc(const std::vector<double>& scores, const std::vector<bool>& labels);

struct SensSpec {
  double sensitivity;
  double specificity;
};
SensSpec sens_spec(const std::vector<bool>& detections, const std::vector<bool>& labels);

struct DensityErrorStats {
  double std_hu;  // population std of signed errors about zero
  double p95_hu;  // nearest-rank 95th percentile of |error|
  double max_hu;
};
DensityErrorStats density_error_stats(const std::vector<double>& pred_means,
                                      const std::vector<double>& truth_means);

}  // namespace hepato
