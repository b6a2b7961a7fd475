#pragma once

#include <string>
#include <vector>

#include "volume.hpp"

namespace hepato {

// Whole-body craniocaudal bone-area profile with the liver interval marked
// on it. Sample k covers template z in [k, k+1) mm.
struct SkeletonTemplate {
  std::vector<double> bone_area_mm2;
  double liver_z_lo_mm = 0.0;
  double liver_z_hi_mm = 0.0;

  void validate() const;  // throws std::invalid_argument
};

// Per-millimeter cross-sectional area of bone (HU >= 200), resampled to a
// 1 mm craniocaudal grid. The volume's z axis must run feet-to-head.
std::vector<double> bone_profile(const CtVolume& vol);

struct AnatomyMatch {
  double z_offset_mm = 0.0;   // template coordinate of the volume's first slice
  double score = 0.0;          // normalized correlation in [-1, 1]
  double liver_overlap_fraction = 0.0;
  bool no_bone = false;
};

// Best integer-mm alignment of the volume's bone profile against the
// template profile (>= 30 mm overlap required; ties go to the smallest
// offset). A boneless volume yields the no-bone outcome.
AnatomyMatch locate_anatomy(const CtVolume& vol, const SkeletonTemplate& tmpl);

struct GateResult {
  bool present = false;
  // template liver interval mapped into volume z coordinates (physical mm),
  // clipped to the volume extent; valid when present
  double z_lo_mm = 0.0;
  double z_hi_mm = 0.0;
};

GateResult gate_liver(const AnatomyMatch& match, const SkeletonTemplate& tmpl,
                      const VoxelGrid& vol_grid, double min_overlap);

// The shipped template, produced from the noiseless full-body model.
SkeletonTemplate generate_reference_skeleton();

SkeletonTemplate read_skeleton(const std::string& path);
void write_skeleton(const SkeletonTemplate& tmpl, const std::string& path);

}  // namespace hepato
