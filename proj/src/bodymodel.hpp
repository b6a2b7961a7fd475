#pragma once

#include <cstdint>
#include <optional>

#include "livershape.hpp"

namespace hepato {

// Parametric whole-body layout used both for phantom synthesis and for the
// shipped skeleton template. World frame: x patient right→left, y
// posterior→anterior is negative-y anterior, z feet (0) → head (~1750 mm).
//
// Tissue HU are generator constants from standard CT ranges, not clinical
// claims: soft tissue 30, lung -800, bone 700, bowel gas -900, air -1000.

struct LesionParams {
  double hu;
  double radius_mm;
};

struct BodyModel {
  // per-study jitter (identity when building the reference skeleton)
  double body_scale = 1.0;
  double bone_scale = 1.0;
  double organ_shift_x = 0.0, organ_shift_y = 0.0;

  // liver
  LiverShapeType liver_type = LiverShapeType::I;
  int liver_variant = 0;
  double liver_scale = 1.0;
  double liver_hu = 50.0;
  double liver_shift_x = 0.0, liver_shift_y = 0.0, liver_shift_z = 0.0;
  std::optional<LesionParams> lesion;

  // fixed landmarks (mm, z from feet)
  static constexpr double kHeight = 1750.0;
  static constexpr double kLiverAnchorX = -70.0;
  static constexpr double kLiverAnchorY = -5.0;
  static constexpr double kLiverAnchorZ = 1160.0;
  // canonical liver interval published in the skeleton template
  static constexpr double kLiverZLo = 1085.0;
  static constexpr double kLiverZHi = 1235.0;

  static BodyModel with_jitter(uint64_t seed);

  double hu_at(double x, double y, double z) const;
  bool in_liver(double x, double y, double z) const;  // includes the lesion
  bool in_lesion(double x, double y, double z) const;
  LiverShape liver() const { return liver_shape(liver_type, liver_variant); }
};

}  // namespace hepato
