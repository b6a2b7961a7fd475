#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "atlas.hpp"
#include "volume.hpp"

namespace hepato {

// Soft-tissue candidacy per voxel on the canonical 2 mm grid, in [0, 1].
// Excludes only physically non-parenchymal voxels (air, lung, cortical
// bone) and strong edges; carries no liver-density assumption.
struct FeatureVolume {
  VoxelGrid grid;
  std::vector<float> values;
};

FeatureVolume soft_tissue_feature(const CtVolume& vol);

struct MatchResult {
  bool found = false;
  std::string template_id;
  LiverShapeType shape_type = LiverShapeType::I;
  std::array<double, 3> offset_mm{};  // scaled template corner in volume space
  double scale = 1.0;
  double score = -1.0;
  double visible_fraction = 0.0;
  double best_rejected_score = 0.0;  // best score below the visibility floor
};

struct MatcherConfig {
  double tau = 0.35;
  double scale_min = 0.80;
  double scale_max = 1.25;
  double scale_step = 0.05;
  double coarse_step_mm = 8.0;
  double visibility_floor = 0.4;
  int threads = 1;
};

// Surrounding-shell thickness for the correlation support region. The
// score contrasts template interior against this boundary band, so the
// organ outline, not distant context, decides the placement.
constexpr double kShellMm = 6.0;

// Binary occupancy of a template at the given isotropic scale, resampled
// to out_spacing and run-length encoded along x. The local frame is
// padded by `pad` voxels per side to hold the shell; the template corner
// sits at frame voxel (pad, pad, pad).
struct OccRun {
  int y, z, x0, x1;  // [x0, x1) set, frame coordinates
};
struct ScaledTemplate {
  std::array<int, 3> dims{};  // padded frame dims
  int pad = 0;
  double spacing_mm = 0.0;
  std::vector<OccRun> runs;        // interior
  std::vector<OccRun> shell_runs;  // boundary band around the interior
  std::int64_t popcount = 0;       // interior voxels
  double centroid_z_mm = 0.0;      // of the interior, in the padded frame
};
ScaledTemplate rasterize_scaled(const LiverTemplate& tmpl, double scale, double out_spacing_mm);

// Pearson correlation of occupancy (1 inside, 0 on the shell) against
// feature values over the in-extent part of interior + shell, plus the
// in-extent fraction of interior voxels. Score is -1 when either operand
// has zero variance over that region.
class NccScorer {
 public:
  explicit NccScorer(FeatureVolume feature);
  // offset of the padded frame corner, in whole voxels of the feature grid
  std::pair<double, double> score(const ScaledTemplate& t, const std::array<int, 3>& offset_vox) const;
  const FeatureVolume& feature() const { return feat_; }

 private:
  FeatureVolume feat_;
  std::vector<double> pre1_, pre2_;  // per-row x prefix sums of f and f^2
};

// Reference single-placement evaluation at an arbitrary physical offset.
std::pair<double, double> ncc_score(const LiverTemplate& tmpl, const FeatureVolume& feat,
                                    const std::array<double, 3>& offset_mm, double scale);

// Coarse-to-fine correlation search over all templates, translations with
// the template liver centroid within [z_lo - 30, z_hi + 30] mm, and the
// configured scale sweep. Deterministic for fixed inputs regardless of
// thread count.
MatchResult search(const CtVolume& vol, const TemplateAtlas& atlas, double z_lo_mm, double z_hi_mm,
                   const MatcherConfig& cfg);

bool decide(const MatchResult& match, double tau);

}  // namespace hepato
