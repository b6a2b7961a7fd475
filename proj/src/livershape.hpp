#pragma once

#include <array>
#include <cmath>

namespace hepato {

// The six right/left lobe size combinations. Right lobe class is driven by
// craniocaudal extent, left lobe class by the lateral-extent ratio.
enum class LiverShapeType { I, II, III, IV, V, VI };

enum class LobeClass { Shortened, Normal, Elongated };

struct Ellipsoid {
  std::array<double, 3> center;
  std::array<double, 3> semi;

  bool contains(double x, double y, double z, double inflate_mm = 0.0) const {
    double dx = (x - center[0]) / (semi[0] + inflate_mm);
    double dy = (y - center[1]) / (semi[1] + inflate_mm);
    double dz = (z - center[2]) / (semi[2] + inflate_mm);
    return dx * dx + dy * dy + dz * dz <= 1.0;
  }
};

// Two-lobe parametric liver in a local frame: right lobe centered at the
// origin, left lobe offset toward patient-left (+x). All sizes in mm at
// scale 1; scaling is isotropic about the local origin.
struct LiverShape {
  Ellipsoid right;
  Ellipsoid left;

  bool contains(double x, double y, double z, double scale = 1.0, double inflate_mm = 0.0) const {
    x /= scale;
    y /= scale;
    z /= scale;
    double infl = inflate_mm / scale;
    return right.contains(x, y, z, infl) || left.contains(x, y, z, infl);
  }

  // craniocaudal extent of the right lobe at scale 1
  double right_cc_mm() const { return 2.0 * right.semi[2]; }

  // local-frame bounding box at the given scale, inflated
  void bounds(double scale, double infl, std::array<double, 3>& lo, std::array<double, 3>& hi) const {
    for (int a = 0; a < 3; ++a) {
      double rlo = right.center[a] - right.semi[a], rhi = right.center[a] + right.semi[a];
      double llo = left.center[a] - left.semi[a], lhi = left.center[a] + left.semi[a];
      lo[a] = (std::min(rlo, llo) - infl) * scale;
      hi[a] = (std::max(rhi, lhi) + infl) * scale;
    }
  }
};

// Parameter table for the six types, two size variants each. Right-lobe
// z-semi axes put the cc extent in the intended classifier band; left-lobe
// x-semi axes put the measured lateral ratio in the intended band.
inline LiverShape liver_shape(LiverShapeType type, int variant) {
  auto right_rz = [&](bool elongated) {
    if (elongated) return variant == 0 ? 82.5 : 86.0;
    return variant == 0 ? 72.5 : 75.0;
  };
  auto left_lx = [&](LobeClass c) {
    switch (c) {
      case LobeClass::Shortened: return variant == 0 ? 28.0 : 31.0;
      case LobeClass::Normal: return variant == 0 ? 56.0 : 59.0;
      default: return variant == 0 ? 80.0 : 84.0;
    }
  };
  bool right_elong = type == LiverShapeType::IV || type == LiverShapeType::V || type == LiverShapeType::VI;
  LobeClass left_class;
  switch (type) {
    case LiverShapeType::II:
    case LiverShapeType::V: left_class = LobeClass::Elongated; break;
    case LiverShapeType::III:
    case LiverShapeType::VI: left_class = LobeClass::Shortened; break;
    default: left_class = LobeClass::Normal; break;
  }
  double rz = right_rz(right_elong);
  double lx = left_lx(left_class);
  double ry = variant == 0 ? 55.0 : 58.0;
  LiverShape s;
  s.right = {{0.0, 0.0, 0.0}, {60.0, ry, rz}};
  s.left = {{60.0 + lx - 22.0, -15.0, 8.0}, {lx, 45.0, 50.0}};
  return s;
}

inline const char* shape_type_name(LiverShapeType t) {
  switch (t) {
    case LiverShapeType::I: return "I";
    case LiverShapeType::II: return "II";
    case LiverShapeType::III: return "III";
    case LiverShapeType::IV: return "IV";
    case LiverShapeType::V: return "V";
    case LiverShapeType::VI: return "VI";
  }
  return "?";
}

}  // namespace hepato
