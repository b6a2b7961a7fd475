#include "skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bodymodel.hpp"
#include "errors.hpp"
#include "mvol.hpp"

namespace hepato {

void SkeletonTemplate::validate() const {
  if (bone_area_mm2.empty()) throw std::invalid_argument("skeleton: empty profile");
  for (double a : bone_area_mm2)
    if (!(a >= 0)) throw std::invalid_argument("skeleton: negative area");
  if (!(liver_z_lo_mm >= 0 && liver_z_lo_mm < liver_z_hi_mm &&
        liver_z_hi_mm <= double(bone_area_mm2.size())))
    throw std::invalid_argument("skeleton: liver interval out of range");
}

std::vector<double> bone_profile(const CtVolume& vol) {
  const VoxelGrid& g = vol.grid;
  std::vector<double> slice_area(g.dims[2], 0.0);
  const double pix = g.spacing_mm[0] * g.spacing_mm[1];
  std::size_t plane = std::size_t(g.dims[0]) * g.dims[1];
  for (int z = 0; z < g.dims[2]; ++z) {
    std::int64_t n = 0;
    const int16_t* p = &vol.values[plane * z];
    for (std::size_t i = 0; i < plane; ++i)
      if (p[i] >= 200) ++n;
    slice_area[z] = double(n) * pix;
  }

  // resample slice areas (at slice centers) onto a 1 mm z grid
  int n = std::max(1, int(std::floor(g.extent_mm(2))));
  std::vector<double> out(n);
  double sz = g.spacing_mm[2];
  for (int k = 0; k < n; ++k) {
    double t = (k + 0.5) / sz - 0.5;  // fractional slice index
    t = std::clamp(t, 0.0, double(g.dims[2] - 1));
    int i0 = std::min(int(t), std::max(g.dims[2] - 2, 0));
    double c = g.dims[2] == 1 ? 0.0 : t - i0;
    int i1 = std::min(i0 + 1, g.dims[2] - 1);
    out[k] = slice_area[i0] + c * (slice_area[i1] - slice_area[i0]);
  }
  return out;
}

namespace {

// Pearson correlation of v[k] against t[o+k] over the overlap window.
double window_ncc(const std::vector<double>& v, const std::vector<double>& t, int o, int* len) {
  int k0 = std::max(0, -o);
  int k1 = std::min(int(v.size()), int(t.size()) - o);
  *len = k1 - k0;
  if (*len < 30) return -2.0;
  double sv = 0, st = 0;
  for (int k = k0; k < k1; ++k) {
    sv += v[k];
    st += t[o + k];
  }
  double mv = sv / *len, mt = st / *len;
  double cvv = 0, ctt = 0, cvt = 0;
  for (int k = k0; k < k1; ++k) {
    double a = v[k] - mv, b = t[o + k] - mt;
    cvv += a * a;
    ctt += b * b;
    cvt += a * b;
  }
  if (cvv <= 1e-12 || ctt <= 1e-12) return -2.0;
  return cvt / std::sqrt(cvv * ctt);
}

}  // namespace

AnatomyMatch locate_anatomy(const CtVolume& vol, const SkeletonTemplate& tmpl) {
  tmpl.validate();
  std::vector<double> prof = bone_profile(vol);

  AnatomyMatch m;
  double peak = *std::max_element(prof.begin(), prof.end());
  if (peak <= 0) {
    m.no_bone = true;
    return m;
  }

  int lv = int(prof.size()), lt = int(tmpl.bone_area_mm2.size());
  double best = -2.0;
  int best_o = 0;
  bool any = false;
  for (int o = -(lv - 30); o <= lt - 30; ++o) {
    int len;
    double s = window_ncc(prof, tmpl.bone_area_mm2, o, &len);
    if (s <= -2.0) continue;
    if (!any || s > best) {
      best = s;
      best_o = o;
      any = true;
    }
  }
  if (!any) {
    m.no_bone = true;  // profiles flat everywhere: nothing to align on
    return m;
  }
  m.z_offset_mm = best_o;
  m.score = best;
  double cover_lo = std::max(tmpl.liver_z_lo_mm, double(best_o));
  double cover_hi = std::min(tmpl.liver_z_hi_mm, double(best_o) + lv);
  m.liver_overlap_fraction =
      std::max(0.0, cover_hi - cover_lo) / (tmpl.liver_z_hi_mm - tmpl.liver_z_lo_mm);
  return m;
}

GateResult gate_liver(const AnatomyMatch& match, const SkeletonTemplate& tmpl,
                      const VoxelGrid& vol_grid, double min_overlap) {
  if (!(min_overlap > 0 && min_overlap <= 1))
    throw std::invalid_argument("gate_liver: min_overlap must be in (0, 1]");
  GateResult r;
  if (match.no_bone || match.score < 0.5 || match.liver_overlap_fraction < min_overlap) return r;
  double lo = tmpl.liver_z_lo_mm - match.z_offset_mm;  // volume-local mm
  double hi = tmpl.liver_z_hi_mm - match.z_offset_mm;
  lo = std::clamp(lo, 0.0, vol_grid.extent_mm(2));
  hi = std::clamp(hi, 0.0, vol_grid.extent_mm(2));
  if (hi <= lo) return r;
  r.present = true;
  r.z_lo_mm = vol_grid.origin_mm[2] + lo;
  r.z_hi_mm = vol_grid.origin_mm[2] + hi;
  return r;
}

SkeletonTemplate generate_reference_skeleton() {
  BodyModel model;  // neutral jitter, no noise
  SkeletonTemplate t;
  const int n = int(BodyModel::kHeight);
  t.bone_area_mm2.resize(n);
  const double step = 2.0;
  for (int k = 0; k < n; ++k) {
    double z = k + 0.5;
    std::int64_t count = 0;
    for (double y = -152; y < 152; y += step)
      for (double x = -212; x < 212; x += step)
        if (model.hu_at(x, y, z) >= 200) ++count;
    t.bone_area_mm2[k] = double(count) * step * step;
  }
  // The declared interval extends a little below the nominal anatomical
  // bound: elongated right lobes reach lower, and the extra span centers
  // the overlap fraction on the volumetric visible fraction.
  t.liver_z_lo_mm = BodyModel::kLiverZLo - 6.0;
  t.liver_z_hi_mm = BodyModel::kLiverZHi;
  t.validate();
  return t;
}

SkeletonTemplate read_skeleton(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("skeleton: cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != "SKEL 1") throw FormatError("skeleton: bad magic in " + path);
  if (!std::getline(f, line)) throw FormatError("skeleton: missing liver line in " + path);
  SkeletonTemplate t;
  {
    std::istringstream is(line);
    std::string word;
    if (!(is >> word >> t.liver_z_lo_mm >> t.liver_z_hi_mm) || word != "liver")
      throw FormatError("skeleton: bad liver line in " + path);
  }
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    try {
      t.bone_area_mm2.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw FormatError("skeleton: bad area value in " + path);
    }
  }
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("skeleton: ") + e.what() + " in " + path);
  }
  return t;
}

void write_skeleton(const SkeletonTemplate& tmpl, const std::string& path) {
  tmpl.validate();
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("skeleton: cannot write " + path);
  f << "SKEL 1\n";
  f << "liver " << format_double(tmpl.liver_z_lo_mm) << ' ' << format_double(tmpl.liver_z_hi_mm)
    << '\n';
  for (double a : tmpl.bone_area_mm2) f << format_double(a) << '\n';
  if (!f.good()) throw IoError("skeleton: write failure " + path);
}

}  // namespace hepato
