#pragma once

#include "atlas.hpp"
#include "densitometry.hpp"
#include "matcher.hpp"
#include "volume.hpp"

namespace hepato {

// Rasterize a matched template placement onto the volume grid.
BinaryMask place_template(const LiverTemplate& tmpl, const MatchResult& match,
                          const VoxelGrid& grid);

struct RefineConfig {
  double gate_sigma = 2.5;         // mode-consistency half-width, in mode sigmas
  double max_surface_dist_mm = 15.0;  // hard cap around the placed template
  double closing_mm = 3.0;
  double seed_erosion_mm = 4.0;
  int max_sweeps = 100;
};

struct RefinementResult {
  BinaryMask final_mask;
  BinaryMask added;     // final minus placed
  BinaryMask excluded;  // placed minus final
  int iterations = 0;   // region-growth sweeps
  bool fallback = false;  // empty seed: final_mask is the unrefined placement
};

// Density-driven boundary adjustment: voxels within gate_sigma of any mode
// are liver-consistent; growth starts from the eroded consistent core of
// the placement and never leaves max_surface_dist_mm around it. The result
// is a single connected component.
RefinementResult refine_boundary(const CtVolume& vol, const BinaryMask& placed,
                                 const DensityReport& report, const RefineConfig& cfg = {});

// Densitometry on the refined mask; the study's final numbers.
DensityReport remeasure(const CtVolume& vol, const RefinementResult& result);

}  // namespace hepato
