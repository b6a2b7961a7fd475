#include "phantom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "parallel.hpp"
#include "rng.hpp"

namespace hepato {

std::optional<PhantomKind> parse_phantom_kind(const std::string& name) {
  if (name == "body") return PhantomKind::Body;
  if (name == "chest_crop") return PhantomKind::ChestCrop;
  if (name == "head") return PhantomKind::Head;
  if (name == "limb") return PhantomKind::Limb;
  return std::nullopt;
}

const char* phantom_kind_name(PhantomKind k) {
  switch (k) {
    case PhantomKind::Body: return "body";
    case PhantomKind::ChestCrop: return "chest_crop";
    case PhantomKind::Head: return "head";
    case PhantomKind::Limb: return "limb";
  }
  return "?";
}

void PhantomSpec::validate() const {
  if (liver_hu < -200 || liver_hu > 300)
    throw std::invalid_argument("phantom: liver_hu must be in [-200, 300]");
  if (noise_sigma_hu < 0) throw std::invalid_argument("phantom: noise_sigma must be >= 0");
  if (!(fov_liver_fraction > 0) || fov_liver_fraction > 1)
    throw std::invalid_argument("phantom: fov_liver_fraction must be in (0, 1]");
  if (!(liver_scale >= 0.5 && liver_scale <= 2.0))
    throw std::invalid_argument("phantom: liver_scale must be in [0.5, 2]");
  for (double s : spacing_mm)
    if (!(s > 0)) throw std::invalid_argument("phantom: spacing must be > 0");
  if (lesion) {
    if (lesion->hu < -200 || lesion->hu > 300)
      throw std::invalid_argument("phantom: lesion hu must be in [-200, 300]");
    if (lesion->radius_mm <= 0 && lesion->fraction <= 0)
      throw std::invalid_argument("phantom: lesion needs a radius or a volume fraction");
    if (lesion->fraction < 0 || lesion->fraction > 0.5)
      throw std::invalid_argument("phantom: lesion fraction must be in [0, 0.5]");
  }
}

namespace {

const LiverShapeType kAllTypes[] = {LiverShapeType::I,  LiverShapeType::II, LiverShapeType::III,
                                    LiverShapeType::IV, LiverShapeType::V,  LiverShapeType::VI};

// liver volume (mm^3) by coarse rasterization of the local shape
double liver_volume_mm3(const BodyModel& m) {
  LiverShape s = m.liver();
  std::array<double, 3> lo, hi;
  s.bounds(m.liver_scale, 0.0, lo, hi);
  const double step = 3.0;
  std::int64_t count = 0;
  for (double z = lo[2] + step / 2; z < hi[2]; z += step)
    for (double y = lo[1] + step / 2; y < hi[1]; y += step)
      for (double x = lo[0] + step / 2; x < hi[0]; x += step)
        if (s.contains(x, y, z, m.liver_scale)) ++count;
  return double(count) * step * step * step;
}

// z cut so that the top `fraction` of liver voxels stays in the field of view
double chest_cut_z(const BodyModel& m, double fraction) {
  std::array<double, 3> lo, hi;
  m.liver().bounds(m.liver_scale, 0.0, lo, hi);
  double z0 = lo[2] + BodyModel::kLiverAnchorZ + m.liver_shift_z;
  double z1 = hi[2] + BodyModel::kLiverAnchorZ + m.liver_shift_z;
  const double dz = 1.0, dxy = 2.0;
  int nz = int(std::ceil((z1 - z0) / dz));
  std::vector<double> slice(nz, 0.0);
  double total = 0;
  for (int iz = 0; iz < nz; ++iz) {
    double z = z0 + (iz + 0.5) * dz;
    double area = 0;
    for (double y = lo[1] + BodyModel::kLiverAnchorY - 10; y < hi[1] + BodyModel::kLiverAnchorY + 10; y += dxy)
      for (double x = lo[0] + BodyModel::kLiverAnchorX - 10; x < hi[0] + BodyModel::kLiverAnchorX + 10; x += dxy)
        if (m.in_liver(x, y, z)) area += 1;
    slice[iz] = area;
    total += area;
  }
  if (total <= 0) return z0;
  double acc = 0;
  for (int iz = nz - 1; iz >= 0; --iz) {
    acc += slice[iz];
    if (acc >= fraction * total) return z0 + iz * dz;
  }
  return z0;
}

}  // namespace

std::pair<CtVolume, PhantomTruth> generate_phantom(const PhantomSpec& spec) {
  spec.validate();

  BodyModel model = BodyModel::with_jitter(spec.seed);
  model.liver_hu = spec.liver_hu;
  model.liver_scale = spec.liver_scale;
  Rng pick(Rng::derive(spec.seed, 0x11f3));
  model.liver_type = kAllTypes[pick.next_u64() % 6];
  model.liver_variant = int(pick.next_u64() % 2);

  if (spec.lesion) {
    LesionParams lp;
    lp.hu = spec.lesion->hu;
    if (spec.lesion->fraction > 0) {
      double v = liver_volume_mm3(model);
      lp.radius_mm = std::cbrt(3.0 * spec.lesion->fraction * v / (4.0 * 3.14159265358979));
    } else {
      lp.radius_mm = spec.lesion->radius_mm;
    }
    // keep the sphere inside the right lobe
    double cap = 0.8 * 55.0 * model.liver_scale;
    lp.radius_mm = std::min(lp.radius_mm, cap);
    model.lesion = lp;
  }

  Rng crop(Rng::derive(spec.seed, 0xc209));
  double xlo, xhi, ylo, yhi, zlo, zhi;
  switch (spec.kind) {
    case PhantomKind::Body:
      xlo = -212; xhi = 212; ylo = -152; yhi = 152;
      zlo = 1005 + crop.uniform(-15, 15);
      zhi = 1445 + crop.uniform(-15, 15);
      break;
    case PhantomKind::ChestCrop:
      xlo = -212; xhi = 212; ylo = -152; yhi = 152;
      zlo = chest_cut_z(model, spec.fov_liver_fraction);
      zhi = 1475 + crop.uniform(-10, 10);
      break;
    case PhantomKind::Head:
      xlo = -116; xhi = 116; ylo = -116; yhi = 116;
      zlo = 1528 + crop.uniform(-8, 8);
      zhi = 1756;
      break;
    case PhantomKind::Limb:
    default:
      xlo = 5; xhi = 175; ylo = -105; yhi = 105;
      zlo = 610 + crop.uniform(-20, 20);
      zhi = 930 + crop.uniform(-20, 20);
      break;
  }

  VoxelGrid g;
  double lo[3] = {xlo, ylo, zlo}, hi[3] = {xhi, yhi, zhi};
  for (int a = 0; a < 3; ++a) {
    g.origin_mm[a] = lo[a];
    if (spec.dims_override) {
      g.dims[a] = (*spec.dims_override)[a];
      g.spacing_mm[a] = (hi[a] - lo[a]) / g.dims[a];
    } else {
      g.spacing_mm[a] = spec.spacing_mm[a];
      g.dims[a] = std::max(1, int(std::lround((hi[a] - lo[a]) / g.spacing_mm[a])));
    }
  }
  g.validate();

  CtVolume vol = make_volume(g);
  PhantomTruth truth;
  truth.liver_mask = make_mask(g);
  truth.liver_mean_hu = spec.liver_hu;
  truth.liver_present = spec.kind == PhantomKind::Body || spec.kind == PhantomKind::ChestCrop;
  if (spec.lesion) truth.lesion_mask = make_mask(g);

  const double sigma = spec.noise_sigma_hu;
  parallel_for(g.dims[2], 8, [&](int64_t zl, int64_t zh) {
    for (int z = int(zl); z < int(zh); ++z) {
      Rng slice_rng(Rng::derive(spec.seed ^ 0x9e11ca7eULL, uint64_t(z)));
      double zc = g.center_mm(2, z);
      for (int y = 0; y < g.dims[1]; ++y) {
        double yc = g.center_mm(1, y);
        for (int x = 0; x < g.dims[0]; ++x) {
          double xc = g.center_mm(0, x);
          double hu = model.hu_at(xc, yc, zc);
          if (sigma > 0) hu += slice_rng.normal(0.0, sigma);
          double r = std::nearbyint(hu);
          vol.values[g.index(x, y, z)] = int16_t(std::clamp(r, double(kHuMin), double(kHuMax)));
          if (truth.liver_present && model.in_liver(xc, yc, zc)) {
            truth.liver_mask.bits[g.index(x, y, z)] = 1;
            if (truth.lesion_mask && model.in_lesion(xc, yc, zc))
              truth.lesion_mask->bits[g.index(x, y, z)] = 1;
          }
        }
      }
    }
  });

  return {std::move(vol), std::move(truth)};
}

}  // namespace hepato
