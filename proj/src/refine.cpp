#include "refine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace hepato {

BinaryMask place_template(const LiverTemplate& tmpl, const MatchResult& match,
                          const VoxelGrid& grid) {
  if (!match.found) throw std::invalid_argument("place_template: no match");
  if (!(match.scale > 0)) throw std::invalid_argument("place_template: bad scale");
  const VoxelGrid& tg = tmpl.mask.grid;
  BinaryMask out = make_mask(grid);

  // bounding box of the scaled template in volume indices
  int lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    double ext = tg.extent_mm(a) * match.scale;
    lo[a] = std::max(0, int(std::floor((match.offset_mm[a] - grid.origin_mm[a]) / grid.spacing_mm[a])));
    hi[a] = std::min(grid.dims[a],
                     int(std::ceil((match.offset_mm[a] + ext - grid.origin_mm[a]) / grid.spacing_mm[a])) + 1);
  }
  for (int z = lo[2]; z < hi[2]; ++z)
    for (int y = lo[1]; y < hi[1]; ++y)
      for (int x = lo[0]; x < hi[0]; ++x) {
        double tx = tg.origin_mm[0] + (grid.center_mm(0, x) - match.offset_mm[0]) / match.scale;
        double ty = tg.origin_mm[1] + (grid.center_mm(1, y) - match.offset_mm[1]) / match.scale;
        double tz = tg.origin_mm[2] + (grid.center_mm(2, z) - match.offset_mm[2]) / match.scale;
        if (sample_trilinear_mask(tmpl.mask, tx, ty, tz) >= 0.5) out.bits[grid.index(x, y, z)] = 1;
      }
  return out;
}

namespace {

BinaryMask consistent_mask(const CtVolume& vol, const DensityReport& report, double gate_sigma) {
  BinaryMask m = make_mask(vol.grid);
  for (std::size_t i = 0; i < m.bits.size(); ++i) {
    double hu = vol.values[i];
    for (const DensityMode& mode : report.modes) {
      double half = std::max(gate_sigma * mode.std_hu, 1.0);
      if (std::abs(hu - mode.mean_hu) <= half) {
        m.bits[i] = 1;
        break;
      }
    }
  }
  return m;
}

BinaryMask intersect(const BinaryMask& a, const BinaryMask& b) {
  BinaryMask out = a;
  for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] &= b.bits[i];
  return out;
}

}  // namespace

RefinementResult refine_boundary(const CtVolume& vol, const BinaryMask& placed,
                                 const DensityReport& report, const RefineConfig& cfg) {
  if (placed.grid != vol.grid) throw std::invalid_argument("refine_boundary: grid mismatch");
  if (placed.popcount() == 0) throw std::invalid_argument("refine_boundary: empty placement");
  if (report.modes.empty()) throw std::invalid_argument("refine_boundary: no modes");

  const VoxelGrid& g = vol.grid;
  BinaryMask consistent = consistent_mask(vol, report, cfg.gate_sigma);
  BinaryMask seed = largest_component(morph(intersect(placed, consistent), MorphOp::Erode,
                                            cfg.seed_erosion_mm));

  RefinementResult r;
  if (seed.popcount() == 0) {
    r.final_mask = placed;
    r.added = make_mask(g);
    r.excluded = make_mask(g);
    r.fallback = true;
    return r;
  }

  BinaryMask cap = morph(placed, MorphOp::Dilate, cfg.max_surface_dist_mm);
  BinaryMask allowed = intersect(consistent, cap);

  // layered 6-connected growth from the seed over the allowed set
  BinaryMask grown = seed;
  std::vector<std::size_t> frontier;
  for (std::size_t i = 0; i < seed.bits.size(); ++i)
    if (seed.bits[i]) frontier.push_back(i);
  const std::size_t nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  int sweeps = 0;
  std::vector<std::size_t> next;
  while (!frontier.empty() && sweeps < cfg.max_sweeps) {
    next.clear();
    for (std::size_t i : frontier) {
      std::size_t x = i % nx, y = (i / nx) % ny, z = i / (nx * ny);
      auto visit = [&](std::size_t j) {
        if (!grown.bits[j] && allowed.bits[j]) {
          grown.bits[j] = 1;
          next.push_back(j);
        }
      };
      if (x > 0) visit(i - 1);
      if (x + 1 < nx) visit(i + 1);
      if (y > 0) visit(i - nx);
      if (y + 1 < ny) visit(i + nx);
      if (z > 0) visit(i - nx * ny);
      if (z + 1 < nz) visit(i + nx * ny);
    }
    if (next.empty()) break;
    std::swap(frontier, next);
    ++sweeps;
  }

  BinaryMask closed = morph(grown, MorphOp::Close, cfg.closing_mm);
  r.final_mask = largest_component(intersect(closed, cap));
  r.iterations = sweeps;

  r.added = make_mask(g);
  r.excluded = make_mask(g);
  for (std::size_t i = 0; i < placed.bits.size(); ++i) {
    if (r.final_mask.bits[i] && !placed.bits[i]) r.added.bits[i] = 1;
    if (placed.bits[i] && !r.final_mask.bits[i]) r.excluded.bits[i] = 1;
  }
  return r;
}

DensityReport remeasure(const CtVolume& vol, const RefinementResult& result) {
  return measure_density(vol, result.final_mask);
}

}  // namespace hepato
