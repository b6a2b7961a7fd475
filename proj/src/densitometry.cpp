#include "densitometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "livershape.hpp"

namespace hepato {

std::int64_t HuHistogram::total() const {
  std::int64_t t = under + over;
  for (std::int64_t b : bins) t += b;
  return t;
}

HuHistogram hu_histogram(const CtVolume& vol, const BinaryMask& mask, double erosion_mm) {
  if (mask.grid != vol.grid) throw std::invalid_argument("hu_histogram: grid mismatch");
  if (mask.popcount() == 0) throw std::invalid_argument("hu_histogram: empty mask");

  BinaryMask interior = morph(mask, MorphOp::Erode, erosion_mm);
  const BinaryMask& src = interior.popcount() > 0 ? interior : mask;

  HuHistogram h;
  for (std::size_t i = 0; i < src.bits.size(); ++i) {
    if (!src.bits[i]) continue;
    int hu = vol.values[i];
    if (hu < HuHistogram::kLoHu)
      ++h.under;
    else if (hu > HuHistogram::kHiHu)
      ++h.over;
    else
      ++h.bins[hu - HuHistogram::kLoHu];
  }
  return h;
}

namespace {

// smoothed histogram; truncated Gaussian renormalized at the borders
std::vector<double> smooth_bins(const HuHistogram& h, double sigma) {
  const int n = HuHistogram::kBins;
  const int radius = int(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k)
    kernel[k + radius] = std::exp(-0.5 * (k / sigma) * (k / sigma));
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0, wsum = 0;
    for (int k = -radius; k <= radius; ++k) {
      int j = i + k;
      if (j < 0 || j >= n) continue;
      acc += kernel[k + radius] * double(h.bins[j]);
      wsum += kernel[k + radius];
    }
    out[i] = wsum > 0 ? acc / wsum : 0.0;
  }
  return out;
}

double prominence(const std::vector<double>& s, int p) {
  double left = s[p], right = s[p];
  for (int j = p - 1; j >= 0; --j) {
    if (s[j] > s[p]) break;
    left = std::min(left, s[j]);
  }
  for (int j = p + 1; j < int(s.size()); ++j) {
    if (s[j] > s[p]) break;
    right = std::min(right, s[j]);
  }
  return s[p] - std::max(left, right);
}

}  // namespace

std::vector<ModeInterval> find_modes(const HuHistogram& hist, const DensityConfig& cfg) {
  if (hist.total() <= 0) throw std::invalid_argument("find_modes: empty histogram");
  const int n = HuHistogram::kBins;
  std::vector<double> s = smooth_bins(hist, cfg.smooth_sigma_bins);
  const int sep = std::max(1, int(std::lround(cfg.separation_hu)));

  double global_max = *std::max_element(s.begin(), s.end());
  int global_argmax = int(std::max_element(s.begin(), s.end()) - s.begin());

  // local maxima, plateaus collapsed to their first bin
  std::vector<int> candidates;
  for (int i = 0; i < n; ++i) {
    if (s[i] <= 0) continue;
    if (i > 0 && s[i - 1] >= s[i]) continue;
    int j = i;
    while (j + 1 < n && s[j + 1] == s[i]) ++j;
    if (j + 1 < n && s[j + 1] > s[i]) continue;
    candidates.push_back(i);
  }

  std::vector<int> peaks;
  for (int p : candidates)
    if (prominence(s, p) >= cfg.prominence * global_max) peaks.push_back(p);

  // separation: keep the tallest of any pair closer than 8 HU
  std::sort(peaks.begin(), peaks.end(), [&](int a, int b) {
    if (s[a] != s[b]) return s[a] > s[b];
    return a < b;
  });
  std::vector<int> kept;
  for (int p : peaks) {
    bool ok = true;
    for (int q : kept)
      if (std::abs(p - q) < sep) ok = false;
    if (ok) kept.push_back(p);
  }
  if (kept.empty()) kept.push_back(global_argmax);
  std::sort(kept.begin(), kept.end());

  std::vector<ModeInterval> modes(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    modes[i].peak_hu = kept[i] + HuHistogram::kLoHu;
    modes[i].lo_hu = HuHistogram::kLoHu;
    modes[i].hi_hu = HuHistogram::kHiHu;
  }
  for (std::size_t i = 0; i + 1 < kept.size(); ++i) {
    int valley = kept[i];
    for (int j = kept[i] + 1; j <= kept[i + 1]; ++j)
      if (s[j] < s[valley]) valley = j;
    modes[i].hi_hu = valley + HuHistogram::kLoHu;
    modes[i + 1].lo_hu = valley + 1 + HuHistogram::kLoHu;
  }
  return modes;
}

DensityReport assign_and_measure(const CtVolume& vol, const BinaryMask& mask,
                                 const std::vector<ModeInterval>& modes) {
  if (mask.grid != vol.grid) throw std::invalid_argument("assign_and_measure: grid mismatch");
  if (modes.empty()) throw std::invalid_argument("assign_and_measure: no modes");
  std::int64_t total = std::int64_t(mask.popcount());
  if (total == 0) throw std::invalid_argument("assign_and_measure: empty mask");

  struct Acc {
    std::int64_t n = 0;
    double sum = 0, sum2 = 0;
  };
  std::vector<Acc> acc(modes.size());

  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    if (!mask.bits[i]) continue;
    double hu = vol.values[i];
    std::size_t best = 0;
    double best_dist = 1e30;
    for (std::size_t m = 0; m < modes.size(); ++m) {
      if (hu >= modes[m].lo_hu && hu <= modes[m].hi_hu) {
        best = m;
        best_dist = 0;
        break;
      }
      double d = hu < modes[m].lo_hu ? modes[m].lo_hu - hu : hu - modes[m].hi_hu;
      if (d < best_dist) {
        best_dist = d;
        best = m;
      }
    }
    acc[best].n += 1;
    acc[best].sum += hu;
    acc[best].sum2 += hu * hu;
  }

  const double voxel_ml = vol.grid.voxel_volume_mm3() / 1000.0;
  DensityReport rep;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    if (acc[m].n == 0) continue;
    DensityMode dm;
    dm.voxel_count = acc[m].n;
    dm.mean_hu = acc[m].sum / double(acc[m].n);
    double var = acc[m].sum2 / double(acc[m].n) - dm.mean_hu * dm.mean_hu;
    dm.std_hu = std::sqrt(std::max(0.0, var));
    dm.volume_ml = double(acc[m].n) * voxel_ml;
    dm.fraction = double(acc[m].n) / double(total);
    dm.lo_hu = modes[m].lo_hu;
    dm.hi_hu = modes[m].hi_hu;
    rep.modes.push_back(dm);
  }
  std::stable_sort(rep.modes.begin(), rep.modes.end(), [](const DensityMode& a, const DensityMode& b) {
    if (a.voxel_count != b.voxel_count) return a.voxel_count > b.voxel_count;
    return a.lo_hu < b.lo_hu;
  });
  rep.total_volume_ml = mask_volume_ml(mask);
  rep.dominant_mode_index = 0;
  return rep;
}

DensityReport measure_density(const CtVolume& vol, const BinaryMask& mask,
                              const DensityConfig& cfg) {
  HuHistogram h = hu_histogram(vol, mask, cfg.erosion_mm);
  DensityReport rep = assign_and_measure(vol, mask, find_modes(h, cfg));
  rep.histogram = h;
  return rep;
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed, decimals);
  return std::string(buf, res.ptr);
}

std::string render_report(const DensityReport& report, const MatchResult& match) {
  std::string out;
  out += "LIVER REPORT\n";
  out += "detected: yes\n";
  out += "template: " + match.template_id + " type: " + shape_type_name(match.shape_type) +
         " score: " + format_fixed(match.score, 3) + "\n";
  out += "visible_fraction: " + format_fixed(match.visible_fraction, 2) + "\n";
  out += "total_volume_ml: " + format_fixed(report.total_volume_ml, 1) + "\n";
  out += "modes: " + std::to_string(report.modes.size()) + "\n";
  for (std::size_t i = 0; i < report.modes.size(); ++i) {
    const DensityMode& m = report.modes[i];
    out += "mode " + std::to_string(i + 1) + ": mean_hu " + format_fixed(m.mean_hu, 1) +
           " std_hu " + format_fixed(m.std_hu, 1) + " volume_ml " + format_fixed(m.volume_ml, 1) +
           " fraction " + format_fixed(m.fraction, 2) + "\n";
  }
  out += "dominant_mode: 1\n";
  return out;
}

std::string render_not_detected(double best_score) {
  return "LIVER REPORT\ndetected: no\nbest_score: " + format_fixed(best_score, 3) + "\n";
}

}  // namespace hepato
