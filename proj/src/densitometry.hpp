#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "matcher.hpp"
#include "volume.hpp"

namespace hepato {

// Counts per 1-HU bin over [-200, 300], plus explicit overflow bins.
struct HuHistogram {
  static constexpr int kLoHu = -200;
  static constexpr int kHiHu = 300;
  static constexpr int kBins = kHiHu - kLoHu + 1;

  std::array<std::int64_t, kBins> bins{};
  std::int64_t under = 0;
  std::int64_t over = 0;

  std::int64_t total() const;
};

struct DensityConfig {
  double erosion_mm = 4.0;       // interior sampling margin
  double smooth_sigma_bins = 3.0;
  double prominence = 0.05;      // of the global histogram maximum
  double separation_hu = 8.0;
};

// Interior histogram: the mask is eroded by erosion_mm before counting to
// drop partial-volume boundary voxels; an erosion that empties the mask
// falls back to the un-eroded mask. Throws std::invalid_argument on an
// empty mask or a grid mismatch.
HuHistogram hu_histogram(const CtVolume& vol, const BinaryMask& mask, double erosion_mm = 4.0);

// Inclusive HU interval around a histogram peak.
struct ModeInterval {
  int peak_hu;
  int lo_hu;
  int hi_hu;
};

// Peak detection on the Gaussian-smoothed histogram (defaults: sigma 3
// bins, prominence 5% of the global maximum, separation 8 HU), intervals
// bounded by the adjacent valleys. Always returns at least one mode.
// Throws std::invalid_argument if the histogram is all zero.
std::vector<ModeInterval> find_modes(const HuHistogram& hist, const DensityConfig& cfg = {});

struct DensityMode {
  double mean_hu = 0.0;
  double std_hu = 0.0;
  std::int64_t voxel_count = 0;
  double volume_ml = 0.0;
  double fraction = 0.0;
  int lo_hu = 0;  // assignment interval
  int hi_hu = 0;
};

struct DensityReport {
  std::vector<DensityMode> modes;  // descending voxel_count
  double total_volume_ml = 0.0;
  int dominant_mode_index = 0;
  HuHistogram histogram;
};

// Assign every voxel of the full (un-eroded) mask to the mode interval
// containing its HU, or the nearest interval otherwise, and measure each
// mode from its assigned voxels. Throws std::invalid_argument on empty
// mask, empty modes, or grid mismatch.
DensityReport assign_and_measure(const CtVolume& vol, const BinaryMask& mask,
                                 const std::vector<ModeInterval>& modes);

// histogram -> modes -> assignment in one call.
DensityReport measure_density(const CtVolume& vol, const BinaryMask& mask,
                              const DensityConfig& cfg = {});

// Deterministic ASCII report; locale independent, '\n' line endings.
std::string render_report(const DensityReport& report, const MatchResult& match);
std::string render_not_detected(double best_score);

// Fixed-decimal formatting used by the reports (shared with the CLI).
std::string format_fixed(double value, int decimals);

}  // namespace hepato
