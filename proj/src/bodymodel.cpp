#include "bodymodel.hpp"

#include <cmath>

#include "rng.hpp"

namespace hepato {

namespace {

inline bool in_ellipse(double x, double y, double cx, double cy, double a, double b) {
  double dx = (x - cx) / a, dy = (y - cy) / b;
  return dx * dx + dy * dy <= 1.0;
}

inline double ellipse_r2(double x, double y, double a, double b) {
  double dx = x / a, dy = y / b;
  return dx * dx + dy * dy;
}

}  // namespace

BodyModel BodyModel::with_jitter(uint64_t seed) {
  BodyModel m;
  Rng r(Rng::derive(seed, 0xb0d7));
  m.body_scale = r.uniform(0.975, 1.025);
  m.bone_scale = r.uniform(0.95, 1.05);
  m.organ_shift_x = r.uniform(-8.0, 8.0);
  m.organ_shift_y = r.uniform(-8.0, 8.0);
  m.liver_shift_x = r.uniform(-6.0, 6.0);
  m.liver_shift_y = r.uniform(-6.0, 6.0);
  m.liver_shift_z = r.uniform(-4.0, 4.0);
  return m;
}

bool BodyModel::in_lesion(double x, double y, double z) const {
  if (!lesion) return false;
  // centered in the right lobe, scaled with the liver
  double cx = kLiverAnchorX + liver_shift_x;
  double cy = kLiverAnchorY + liver_shift_y + 5.0 * liver_scale;
  double cz = kLiverAnchorZ + liver_shift_z - 10.0 * liver_scale;
  double dx = x - cx, dy = y - cy, dz = z - cz;
  double r = lesion->radius_mm;
  return dx * dx + dy * dy + dz * dz <= r * r;
}

bool BodyModel::in_liver(double x, double y, double z) const {
  return liver().contains(x - (kLiverAnchorX + liver_shift_x), y - (kLiverAnchorY + liver_shift_y),
                          z - (kLiverAnchorZ + liver_shift_z), liver_scale);
}

double BodyModel::hu_at(double xw, double yw, double zw) const {
  const double bs = body_scale;
  double x = xw / bs, y = yw / bs;  // body outline jitter is lateral only
  double z = zw;

  if (z < 0 || z > kHeight) return -1000.0;

  // ---- body outline ----
  bool inside = false;
  if (z < 820.0) {
    inside = in_ellipse(x, y, -90, 0, 75, 75) || in_ellipse(x, y, 90, 0, 75, 75);
  } else if (z < 1460.0) {
    inside = in_ellipse(x, y, 0, 0, 170, 110);
  } else if (z < 1540.0) {
    double t = (z - 1460.0) / 80.0;  // shoulders taper to neck
    double a = 170.0 + t * (48.0 - 170.0);
    double b = 110.0 + t * (58.0 - 110.0);
    inside = in_ellipse(x, y, 0, 0, a, b);
  } else {
    inside = in_ellipse(x, y, 0, 0, 78, 92);
  }
  if (!inside) return -1000.0;

  // ---- bone (highest priority inside the body) ----
  const double rb = bone_scale;
  // legs: femur/tibia columns with a knee bulge
  if (z < 835.0) {
    double r = 13.0 * rb;
    if (z >= 735.0 && z <= 775.0) r = 19.0 * rb;
    double rr = r * r;
    double dxl = x + 90, dxr = x - 90;
    if (dxl * dxl + y * y <= rr || dxr * dxr + y * y <= rr) return 700.0;
  }
  // pelvis ring
  if (z >= 825.0 && z <= 915.0) {
    double e = ellipse_r2(x, y + 10, 150, 95);
    if (e >= 0.93 * 0.93 && e <= 1.0) return 700.0;
  }
  // spine
  if (z >= 870.0 && z <= 1505.0) {
    double dx = x, dy = y - 60;
    double r = 16.0 * rb;
    if (dx * dx + dy * dy <= r * r) return 700.0;
  }
  // rib cage shell
  if (z >= 1160.0 && z <= 1430.0) {
    double e = ellipse_r2(x, y, 170, 110);
    if (e >= 0.90 * 0.90 && e <= 0.96 * 0.96) return 700.0;
  }
  // clavicle / scapula bars
  if (z >= 1430.0 && z <= 1470.0) {
    double ax = std::fabs(x);
    if (ax > 40.0 && ax < 150.0 && std::fabs(y - 40.0) < 12.0) return 700.0;
  }
  // cervical spine
  if (z >= 1505.0 && z <= 1562.0) {
    double dx = x, dy = y - 30;
    double r = 12.0 * rb;
    if (dx * dx + dy * dy <= r * r) return 700.0;
  }
  // skull shell + base
  if (z >= 1540.0) {
    double e = ellipse_r2(x, y, 78, 92);
    if (e >= 0.86 * 0.86 && e <= 1.0) return 700.0;
    if (z <= 1578.0 && e <= 0.62 * 0.62) return 700.0;
  }

  // ---- head interior ----
  if (z >= 1540.0) {
    // paranasal / mastoid air spaces
    if (in_ellipse(x, y + 60, 0, 0, 20, 13) && z >= 1600.0 && z <= 1640.0) return -950.0;
    double dxl = x + 52, dxr = x - 52, dy = y - 18;
    if (z >= 1578.0 && z <= 1606.0 &&
        (dxl * dxl + dy * dy <= 13.0 * 13.0 || dxr * dxr + dy * dy <= 13.0 * 13.0))
      return -950.0;
    return 38.0;  // brain
  }

  // ---- liver (with fat rim) and lesion; liver carves into the lung field ----
  double lx = xw - (kLiverAnchorX + liver_shift_x);
  double ly = yw - (kLiverAnchorY + liver_shift_y);
  double lz = zw - (kLiverAnchorZ + liver_shift_z);
  LiverShape shape = liver();
  if (shape.contains(lx, ly, lz, liver_scale)) {
    if (in_lesion(xw, yw, zw)) return lesion->hu;
    return liver_hu;
  }
  if (shape.contains(lx, ly, lz, liver_scale, 3.5)) return -120.0;  // perihepatic fat plane

  // ---- lungs ----
  if (z >= 1172.0 && z <= 1428.0) {
    double ax = std::fabs(x) - 68.0;
    double dy = (y + 8.0) / 78.0, dz = (z - 1300.0) / 128.0;
    double dx = ax / 56.0;
    if (dx * dx + dy * dy + dz * dz <= 1.0) return -800.0;
  }

  // ---- bowel gas ----
  {
    double sx = xw - (75.0 + organ_shift_x), sy = yw - (-45.0 + organ_shift_y), sz = zw - 1130.0;
    if ((sx / 38) * (sx / 38) + (sy / 32) * (sy / 32) + (sz / 42) * (sz / 42) <= 1.0) return -900.0;
    double cx = xw - (20.0 + organ_shift_x), cy = yw - (-60.0 + organ_shift_y), cz = zw - 1030.0;
    if ((cx / 55) * (cx / 55) + (cy / 28) * (cy / 28) + (cz / 26) * (cz / 26) <= 1.0) return -900.0;
  }

  return 30.0;  // soft tissue
}

}  // namespace hepato
