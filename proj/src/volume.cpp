#include "volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "parallel.hpp"

namespace hepato {

namespace {

constexpr double kFar = 1e20;  // finite "infinity" for distance transforms

int internal_threads() {
  int hw = int(std::thread::hardware_concurrency());
  return std::clamp(hw, 1, 8);
}

int16_t clamp_hu(double v) {
  double r = std::nearbyint(v);
  if (r < kHuMin) r = kHuMin;
  if (r > kHuMax) r = kHuMax;
  return int16_t(r);
}

// Felzenszwalb & Huttenlocher 1D squared distance transform over samples
// spaced `step` apart. f holds squared distances (or kFar); d receives the
// lower envelope. v/z are scratch of size n and n+1.
void dt1d(const double* f, int n, double step, double* d, int* v, double* z) {
  const double inf = std::numeric_limits<double>::infinity();
  double s2 = step * step;
  int k = 0;
  v[0] = 0;
  z[0] = -inf;
  z[1] = inf;
  auto intersect = [&](int q, int p) {
    return ((f[q] + double(q) * q * s2) - (f[p] + double(p) * p * s2)) / (2.0 * s2 * (q - p));
  };
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    int p = v[k];
    double dq = double(q - p) * step;
    d[q] = dq * dq + f[p];
  }
}

// Squared EDT to the voxels where src(index) != 0.
std::vector<float> edt_sq(const VoxelGrid& g, const std::vector<uint8_t>& src) {
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  std::vector<float> dist(g.voxel_count());
  for (std::size_t i = 0; i < src.size(); ++i) dist[i] = src[i] ? 0.0f : float(kFar);

  // x pass
  parallel_for(std::int64_t(ny) * nz, internal_threads(), [&](int64_t lo, int64_t hi) {
    std::vector<double> f(nx), d(nx), z(nx + 1);
    std::vector<int> v(nx);
    for (int64_t line = lo; line < hi; ++line) {
      float* row = &dist[std::size_t(line) * nx];
      for (int x = 0; x < nx; ++x) f[x] = row[x];
      dt1d(f.data(), nx, g.spacing_mm[0], d.data(), v.data(), z.data());
      for (int x = 0; x < nx; ++x) row[x] = float(d[x]);
    }
  });
  // y pass
  parallel_for(std::int64_t(nx) * nz, internal_threads(), [&](int64_t lo, int64_t hi) {
    std::vector<double> f(ny), d(ny), z(ny + 1);
    std::vector<int> v(ny);
    for (int64_t line = lo; line < hi; ++line) {
      int z_i = int(line / nx), x = int(line % nx);
      std::size_t base = std::size_t(z_i) * ny * nx + x;
      for (int y = 0; y < ny; ++y) f[y] = dist[base + std::size_t(y) * nx];
      dt1d(f.data(), ny, g.spacing_mm[1], d.data(), v.data(), z.data());
      for (int y = 0; y < ny; ++y) dist[base + std::size_t(y) * nx] = float(d[y]);
    }
  });
  // z pass
  parallel_for(std::int64_t(nx) * ny, internal_threads(), [&](int64_t lo, int64_t hi) {
    std::vector<double> f(nz), d(nz), zb(nz + 1);
    std::vector<int> v(nz);
    std::size_t plane = std::size_t(nx) * ny;
    for (int64_t line = lo; line < hi; ++line) {
      for (int zi = 0; zi < nz; ++zi) f[zi] = dist[std::size_t(line) + plane * zi];
      dt1d(f.data(), nz, g.spacing_mm[2], d.data(), v.data(), zb.data());
      for (int zi = 0; zi < nz; ++zi) dist[std::size_t(line) + plane * zi] = float(d[zi]);
    }
  });
  return dist;
}

BinaryMask dilate_ball(const BinaryMask& mask, double r) {
  std::vector<float> d = edt_sq(mask.grid, mask.bits);
  BinaryMask out = make_mask(mask.grid);
  double r2 = r * r * (1.0 + 1e-12);
  for (std::size_t i = 0; i < d.size(); ++i) out.bits[i] = d[i] <= r2 ? 1 : 0;
  return out;
}

BinaryMask erode_ball(const BinaryMask& mask, double r) {
  // Outside the volume counts as unset, so pad with unset before taking
  // the distance to the complement.
  const VoxelGrid& g = mask.grid;
  std::array<int, 3> pad;
  for (int a = 0; a < 3; ++a) pad[a] = int(std::ceil(r / g.spacing_mm[a])) + 1;
  VoxelGrid pg = g;
  for (int a = 0; a < 3; ++a) pg.dims[a] = g.dims[a] + 2 * pad[a];
  std::vector<uint8_t> comp(pg.voxel_count(), 1);  // complement: 1 = unset
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y) {
      const uint8_t* srow = &mask.bits[g.index(0, y, z)];
      uint8_t* drow = &comp[pg.index(pad[0], y + pad[1], z + pad[2])];
      for (int x = 0; x < g.dims[0]; ++x) drow[x] = srow[x] ? 0 : 1;
    }
  std::vector<float> d = edt_sq(pg, comp);
  BinaryMask out = make_mask(g);
  double r2 = r * r * (1.0 + 1e-12);
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y) {
      const float* drow = &d[pg.index(pad[0], y + pad[1], z + pad[2])];
      uint8_t* orow = &out.bits[g.index(0, y, z)];
      for (int x = 0; x < g.dims[0]; ++x) orow[x] = drow[x] > r2 ? 1 : 0;
    }
  return out;
}

void smooth_axis(std::vector<float>& buf, const VoxelGrid& g, int axis, double sigma_mm) {
  double sigma_vox = sigma_mm / g.spacing_mm[axis];
  int radius = int(std::ceil(3.0 * sigma_vox));
  if (radius < 1) return;
  std::vector<double> kern(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    kern[i + radius] = std::exp(-0.5 * (i / sigma_vox) * (i / sigma_vox));
    sum += kern[i + radius];
  }
  for (double& k : kern) k /= sum;

  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  int n = g.dims[axis];
  std::size_t stride = axis == 0 ? 1 : (axis == 1 ? std::size_t(nx) : std::size_t(nx) * ny);
  std::int64_t nlines = std::int64_t(g.voxel_count()) / n;
  std::vector<float> out(buf.size());
  parallel_for(nlines, internal_threads(), [&](int64_t lo, int64_t hi) {
    std::vector<double> line(n);
    for (int64_t li = lo; li < hi; ++li) {
      // map line index to the base offset of this 1D line
      std::size_t base;
      if (axis == 0) {
        base = std::size_t(li) * nx;
      } else if (axis == 1) {
        int zz = int(li / nx), xx = int(li % nx);
        base = std::size_t(zz) * ny * nx + xx;
      } else {
        base = std::size_t(li);
      }
      for (int i = 0; i < n; ++i) line[i] = buf[base + stride * i];
      for (int i = 0; i < n; ++i) {
        double acc = 0;
        for (int k = -radius; k <= radius; ++k) {
          int j = std::clamp(i + k, 0, n - 1);
          acc += kern[k + radius] * line[j];
        }
        out[base + stride * i] = float(acc);
      }
    }
  });
  buf.swap(out);
}

}  // namespace

void VoxelGrid::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) throw std::invalid_argument("VoxelGrid: dims must be >= 1");
    if (!(spacing_mm[a] > 0)) throw std::invalid_argument("VoxelGrid: spacing must be > 0");
  }
  double count = double(dims[0]) * dims[1] * dims[2];
  if (count > double(std::numeric_limits<std::ptrdiff_t>::max()))
    throw std::invalid_argument("VoxelGrid: voxel count overflows addressable range");
}

std::size_t BinaryMask::popcount() const {
  std::size_t n = 0;
  for (uint8_t b : bits) n += b != 0;
  return n;
}

CtVolume make_volume(const VoxelGrid& grid, int16_t fill) {
  grid.validate();
  return CtVolume{grid, std::vector<int16_t>(grid.voxel_count(), fill)};
}

BinaryMask make_mask(const VoxelGrid& grid, bool fill) {
  grid.validate();
  return BinaryMask{grid, std::vector<uint8_t>(grid.voxel_count(), fill ? 1 : 0)};
}

namespace {

template <typename T>
double trilinear(const VoxelGrid& g, const std::vector<T>& data, double x_mm, double y_mm,
                 double z_mm) {
  double u[3] = {x_mm, y_mm, z_mm};
  double c[3];
  int i0[3];
  for (int a = 0; a < 3; ++a) {
    double t = (u[a] - g.origin_mm[a]) / g.spacing_mm[a] - 0.5;
    t = std::clamp(t, 0.0, double(g.dims[a] - 1));
    i0[a] = std::min(int(t), g.dims[a] - 2 >= 0 ? g.dims[a] - 2 : 0);
    if (g.dims[a] == 1) i0[a] = 0;
    c[a] = t - i0[a];
    if (g.dims[a] == 1) c[a] = 0.0;
  }
  int x1 = std::min(i0[0] + 1, g.dims[0] - 1);
  int y1 = std::min(i0[1] + 1, g.dims[1] - 1);
  int z1 = std::min(i0[2] + 1, g.dims[2] - 1);
  double v000 = data[g.index(i0[0], i0[1], i0[2])], v100 = data[g.index(x1, i0[1], i0[2])];
  double v010 = data[g.index(i0[0], y1, i0[2])], v110 = data[g.index(x1, y1, i0[2])];
  double v001 = data[g.index(i0[0], i0[1], z1)], v101 = data[g.index(x1, i0[1], z1)];
  double v011 = data[g.index(i0[0], y1, z1)], v111 = data[g.index(x1, y1, z1)];
  double cx = c[0], cy = c[1], cz = c[2];
  double v00 = v000 + cx * (v100 - v000);
  double v10 = v010 + cx * (v110 - v010);
  double v01 = v001 + cx * (v101 - v001);
  double v11 = v011 + cx * (v111 - v011);
  double v0 = v00 + cy * (v10 - v00);
  double v1 = v01 + cy * (v11 - v01);
  return v0 + cz * (v1 - v0);
}

VoxelGrid target_grid(const VoxelGrid& in, const std::array<double, 3>& spacing) {
  for (int a = 0; a < 3; ++a)
    if (!(spacing[a] > 0)) throw std::invalid_argument("resample: target spacing must be > 0");
  VoxelGrid out = in;
  out.spacing_mm = spacing;
  for (int a = 0; a < 3; ++a) {
    long n = std::lround(in.extent_mm(a) / spacing[a]);
    if (n < 1) throw std::invalid_argument("resample: degenerate extent on axis " + std::to_string(a));
    out.dims[a] = int(n);
  }
  return out;
}

}  // namespace

double sample_trilinear(const CtVolume& vol, double x_mm, double y_mm, double z_mm) {
  return trilinear(vol.grid, vol.values, x_mm, y_mm, z_mm);
}

double sample_trilinear_mask(const BinaryMask& mask, double x_mm, double y_mm, double z_mm) {
  return trilinear(mask.grid, mask.bits, x_mm, y_mm, z_mm);
}

CtVolume resample(const CtVolume& vol, const std::array<double, 3>& target_spacing_mm) {
  vol.grid.validate();
  VoxelGrid og = target_grid(vol.grid, target_spacing_mm);
  CtVolume out = make_volume(og);
  parallel_for(og.dims[2], internal_threads(), [&](int64_t zlo, int64_t zhi) {
    for (int z = int(zlo); z < int(zhi); ++z) {
      double zc = og.center_mm(2, z);
      for (int y = 0; y < og.dims[1]; ++y) {
        double yc = og.center_mm(1, y);
        for (int x = 0; x < og.dims[0]; ++x) {
          double v = sample_trilinear(vol, og.center_mm(0, x), yc, zc);
          out.values[og.index(x, y, z)] = clamp_hu(v);
        }
      }
    }
  });
  return out;
}

BinaryMask resample_mask(const BinaryMask& mask, const std::array<double, 3>& target_spacing_mm,
                         double occupancy_threshold) {
  mask.grid.validate();
  VoxelGrid og = target_grid(mask.grid, target_spacing_mm);
  BinaryMask out = make_mask(og);
  parallel_for(og.dims[2], internal_threads(), [&](int64_t zlo, int64_t zhi) {
    for (int z = int(zlo); z < int(zhi); ++z) {
      double zc = og.center_mm(2, z);
      for (int y = 0; y < og.dims[1]; ++y) {
        double yc = og.center_mm(1, y);
        for (int x = 0; x < og.dims[0]; ++x) {
          double v = sample_trilinear_mask(mask, og.center_mm(0, x), yc, zc);
          out.bits[og.index(x, y, z)] = v >= occupancy_threshold ? 1 : 0;
        }
      }
    }
  });
  return out;
}

BinaryMask threshold(const CtVolume& vol, double lo_hu, double hi_hu) {
  if (lo_hu > hi_hu) throw std::invalid_argument("threshold: lo_hu > hi_hu");
  BinaryMask out = make_mask(vol.grid);
  for (std::size_t i = 0; i < vol.values.size(); ++i)
    out.bits[i] = (vol.values[i] >= lo_hu && vol.values[i] <= hi_hu) ? 1 : 0;
  return out;
}

BinaryMask morph(const BinaryMask& mask, MorphOp op, double radius_mm) {
  if (radius_mm < 0) throw std::invalid_argument("morph: radius must be >= 0");
  mask.grid.validate();
  if (radius_mm == 0) return mask;
  switch (op) {
    case MorphOp::Dilate:
      return dilate_ball(mask, radius_mm);
    case MorphOp::Erode:
      return erode_ball(mask, radius_mm);
    case MorphOp::Close:
      return erode_ball(dilate_ball(mask, radius_mm), radius_mm);
  }
  throw std::invalid_argument("morph: unknown op");
}

std::vector<float> distance_sq_to_set_mm(const BinaryMask& mask) {
  return edt_sq(mask.grid, mask.bits);
}

ComponentSet connected_components(const BinaryMask& mask) {
  const VoxelGrid& g = mask.grid;
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  ComponentSet cs;
  cs.labels.assign(g.voxel_count(), 0);

  struct Comp {
    std::size_t first;
    std::size_t size;
    int32_t provisional;
  };
  std::vector<Comp> comps;
  std::vector<std::size_t> stack;

  for (std::size_t start = 0; start < mask.bits.size(); ++start) {
    if (!mask.bits[start] || cs.labels[start] != 0) continue;
    int32_t lbl = int32_t(comps.size()) + 1;
    std::size_t size = 0;
    stack.push_back(start);
    cs.labels[start] = lbl;
    while (!stack.empty()) {
      std::size_t i = stack.back();
      stack.pop_back();
      ++size;
      int x = int(i % nx), y = int((i / nx) % ny), z = int(i / (std::size_t(nx) * ny));
      auto visit = [&](int xx, int yy, int zz) {
        if (xx < 0 || yy < 0 || zz < 0 || xx >= nx || yy >= ny || zz >= nz) return;
        std::size_t j = g.index(xx, yy, zz);
        if (mask.bits[j] && cs.labels[j] == 0) {
          cs.labels[j] = lbl;
          stack.push_back(j);
        }
      };
      visit(x - 1, y, z);
      visit(x + 1, y, z);
      visit(x, y - 1, z);
      visit(x, y + 1, z);
      visit(x, y, z - 1);
      visit(x, y, z + 1);
    }
    comps.push_back({start, size, lbl});
  }

  std::sort(comps.begin(), comps.end(), [](const Comp& a, const Comp& b) {
    if (a.size != b.size) return a.size > b.size;
    return a.first < b.first;
  });
  std::vector<int32_t> remap(comps.size() + 1, 0);
  cs.sizes.resize(comps.size());
  for (std::size_t k = 0; k < comps.size(); ++k) {
    remap[comps[k].provisional] = int32_t(k) + 1;
    cs.sizes[k] = comps[k].size;
  }
  for (int32_t& l : cs.labels)
    if (l != 0) l = remap[l];
  return cs;
}

BinaryMask largest_component(const BinaryMask& mask) {
  ComponentSet cs = connected_components(mask);
  BinaryMask out = make_mask(mask.grid);
  if (cs.sizes.empty()) return out;
  for (std::size_t i = 0; i < cs.labels.size(); ++i) out.bits[i] = cs.labels[i] == 1 ? 1 : 0;
  return out;
}

double mask_volume_ml(const BinaryMask& mask) {
  return double(mask.popcount()) * mask.grid.voxel_volume_mm3() / 1000.0;
}

CtVolume gaussian_smooth(const CtVolume& vol, double sigma_mm) {
  if (sigma_mm <= 0) return vol;
  std::vector<float> buf(vol.values.begin(), vol.values.end());
  for (int a = 0; a < 3; ++a) smooth_axis(buf, vol.grid, a, sigma_mm);
  CtVolume out{vol.grid, std::vector<int16_t>(buf.size())};
  for (std::size_t i = 0; i < buf.size(); ++i) out.values[i] = clamp_hu(buf[i]);
  return out;
}

CtVolume flip_z(const CtVolume& vol) {
  CtVolume out{vol.grid, std::vector<int16_t>(vol.values.size())};
  const VoxelGrid& g = vol.grid;
  std::size_t plane = std::size_t(g.dims[0]) * g.dims[1];
  for (int z = 0; z < g.dims[2]; ++z)
    std::copy_n(&vol.values[plane * z], plane, &out.values[plane * (g.dims[2] - 1 - z)]);
  return out;
}

}  // namespace hepato
