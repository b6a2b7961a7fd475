#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hepato {

double dice(const BinaryMask& a, const BinaryMask& b) {
  if (a.grid != b.grid) throw std::invalid_argument("dice: grid mismatch");
  std::int64_t na = 0, nb = 0, nab = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    na += a.bits[i] != 0;
    nb += b.bits[i] != 0;
    nab += (a.bits[i] && b.bits[i]) ? 1 : 0;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * double(nab) / double(na + nb);
}

double roc_auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: length mismatch");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i)
    (labels[i] ? pos : neg).push_back(scores[i]);
  if (pos.empty() || neg.empty()) throw std::invalid_argument("roc_auc: single-class input");
  std::sort(neg.begin(), neg.end());
  double wins = 0;
  for (double p : pos) {
    // negatives strictly below p count 1, equal count 1/2
    auto lo = std::lower_bound(neg.begin(), neg.end(), p);
    auto hi = std::upper_bound(neg.begin(), neg.end(), p);
    wins += double(lo - neg.begin()) + 0.5 * double(hi - lo);
  }
  return wins / (double(pos.size()) * double(neg.size()));
}

SensSpec sens_spec(const std::vector<bool>& detections, const std::vector<bool>& labels) {
  if (detections.size() != labels.size()) throw std::invalid_argument("sens_spec: length mismatch");
  std::int64_t tp = 0, fn = 0, tn = 0, fp = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i])
      detections[i] ? ++tp : ++fn;
    else
      detections[i] ? ++fp : ++tn;
  }
  if (tp + fn == 0 || tn + fp == 0) throw std::invalid_argument("sens_spec: empty class");
  return {double(tp) / double(tp + fn), double(tn) / double(tn + fp)};
}

DensityErrorStats density_error_stats(const std::vector<double>& pred_means,
                                      const std::vector<double>& truth_means) {
  if (pred_means.size() != truth_means.size() || pred_means.empty())
    throw std::invalid_argument("density_error_stats: bad lengths");
  const std::size_t n = pred_means.size();
  std::vector<double> abs_err(n);
  double sum_sq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double e = pred_means[i] - truth_means[i];
    sum_sq += e * e;
    abs_err[i] = std::abs(e);
  }
  std::sort(abs_err.begin(), abs_err.end());
  // nearest-rank: smallest value with at least 95% of samples at or below it
  std::size_t rank = std::size_t(std::ceil(0.95 * double(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return {std::sqrt(sum_sq / double(n)), abs_err[rank - 1], abs_err[n - 1]};
}

}  // namespace hepato
