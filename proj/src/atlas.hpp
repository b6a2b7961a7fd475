#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "livershape.hpp"
#include "volume.hpp"

namespace hepato {

constexpr double kCanonicalSpacingMm = 2.0;

struct LiverTemplate {
  std::string id;
  LiverShapeType shape_type;
  BinaryMask mask;  // canonical 2 mm spacing, tight bbox + 1 voxel margin
  double cc_extent_mm;
};

struct TemplateAtlas {
  std::vector<LiverTemplate> templates;
};

// Right lobe class from craniocaudal extent; 135 and 155 mm are both normal.
LobeClass classify_right_lobe(double cc_mm);

// Left lobe class from the lateral-extent ratio left/right;
// 0.5 and 0.9 are both normal.
LobeClass classify_left_lobe(double left_extent_mm, double right_extent_mm);

// Fixed six-way table; combinations with a shortened right lobe are
// outside the taxonomy and map to nullopt ("unclassified").
std::optional<LiverShapeType> shape_type_of(LobeClass right, LobeClass left);

std::optional<LiverShapeType> parse_shape_type(const std::string& name);

// Largest component, resampled to canonical spacing, cropped to the tight
// bounding box plus a 1-voxel margin. Shape type is taken from the caller
// or measured from the mask's lobe extents.
LiverTemplate build_template(const BinaryMask& mask, const std::string& id,
                             std::optional<LiverShapeType> type = std::nullopt);

// Measured lobe geometry of a liver mask (split at the valley of the
// per-x voxel-count profile; right lobe = the larger side).
struct LobeExtents {
  double right_cc_mm;
  double right_lateral_mm;
  double left_lateral_mm;
};
LobeExtents measure_lobes(const BinaryMask& mask);

// The shipped 12-template base: two procedurally generated size variants
// per shape type.
TemplateAtlas generate_reference_atlas(uint64_t seed);

// Rasterize a parametric liver shape on its own canonical-spacing grid.
BinaryMask rasterize_liver_shape(const LiverShape& shape, double spacing_mm = kCanonicalSpacingMm);

TemplateAtlas read_atlas(const std::string& dir);
void write_atlas(const TemplateAtlas& atlas, const std::string& dir);

// Reference-base check: exactly two templates per shape type.
void validate_reference(const TemplateAtlas& atlas);

}  // namespace hepato
