#include "matcher.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "parallel.hpp"

namespace hepato {

FeatureVolume soft_tissue_feature(const CtVolume& vol) {
  CtVolume ds = resample(vol, {kCanonicalSpacingMm, kCanonicalSpacingMm, kCanonicalSpacingMm});
  const VoxelGrid& g = ds.grid;
  FeatureVolume f{g, std::vector<float>(g.voxel_count())};
  const double g0 = 20.0;  // gradient soft knee, HU/mm

  parallel_for(g.dims[2], 8, [&](int64_t zl, int64_t zh) {
    for (int z = int(zl); z < int(zh); ++z) {
      for (int y = 0; y < g.dims[1]; ++y) {
        for (int x = 0; x < g.dims[0]; ++x) {
          double hu = ds.at(x, y, z);
          double w_range = (hu >= -200.0 && hu <= 300.0) ? 1.0 : 0.0;
          if (w_range == 0.0) {
            f.values[g.index(x, y, z)] = 0.0f;
            continue;
          }
          auto diff = [&](int axis) {
            int i[3] = {x, y, z};
            int lo[3] = {x, y, z}, hi[3] = {x, y, z};
            lo[axis] = std::max(0, i[axis] - 1);
            hi[axis] = std::min(g.dims[axis] - 1, i[axis] + 1);
            double dv = double(ds.at(hi[0], hi[1], hi[2])) - double(ds.at(lo[0], lo[1], lo[2]));
            double dx = (hi[axis] - lo[axis]) * g.spacing_mm[axis];
            return dx > 0 ? dv / dx : 0.0;
          };
          double gx = diff(0), gy = diff(1), gz = diff(2);
          double grad = std::sqrt(gx * gx + gy * gy + gz * gz);
          double w_smooth = 1.0 / (1.0 + (grad / g0) * (grad / g0));
          f.values[g.index(x, y, z)] = float(w_range * w_smooth);
        }
      }
    }
  });
  return f;
}

namespace {

// labels over the padded local frame: 0 outside, 1 interior, 2 shell
std::vector<uint8_t> rasterize_padded(const LiverTemplate& tmpl, double scale, double out_spacing,
                                      std::array<int, 3>& dims, int& pad) {
  const VoxelGrid& tg = tmpl.mask.grid;
  const double shell_mm = std::max(kShellMm, out_spacing);
  pad = int(std::ceil(shell_mm / out_spacing));
  BinaryMask occ;
  for (int a = 0; a < 3; ++a) {
    double size_mm = tg.dims[a] * tg.spacing_mm[a] * scale;
    dims[a] = std::max(1, int(std::ceil(size_mm / out_spacing - 1e-9))) + 2 * pad;
    occ.grid.dims[a] = dims[a];
    occ.grid.spacing_mm[a] = out_spacing;
    occ.grid.origin_mm[a] = 0.0;
  }
  occ.bits.assign(occ.grid.voxel_count(), 0);
  std::size_t i = 0;
  for (int z = 0; z < dims[2]; ++z)
    for (int y = 0; y < dims[1]; ++y)
      for (int x = 0; x < dims[0]; ++x, ++i) {
        double px = tg.origin_mm[0] + (x - pad + 0.5) * out_spacing / scale;
        double py = tg.origin_mm[1] + (y - pad + 0.5) * out_spacing / scale;
        double pz = tg.origin_mm[2] + (z - pad + 0.5) * out_spacing / scale;
        occ.bits[i] = sample_trilinear_mask(tmpl.mask, px, py, pz) >= 0.5 ? 1 : 0;
      }
  BinaryMask grown = morph(occ, MorphOp::Dilate, shell_mm);
  std::vector<uint8_t> labels(occ.bits.size());
  for (std::size_t k = 0; k < labels.size(); ++k)
    labels[k] = occ.bits[k] ? 1 : (grown.bits[k] ? 2 : 0);
  return labels;
}

void encode_runs(const std::vector<uint8_t>& labels, const std::array<int, 3>& dims, uint8_t which,
                 std::vector<OccRun>& runs) {
  std::size_t i = 0;
  for (int z = 0; z < dims[2]; ++z)
    for (int y = 0; y < dims[1]; ++y) {
      int x = 0;
      while (x < dims[0]) {
        if (labels[i + x] != which) {
          ++x;
          continue;
        }
        int x0 = x;
        while (x < dims[0] && labels[i + x] == which) ++x;
        runs.push_back({y, z, x0, x});
      }
      i += dims[0];
    }
}

FeatureVolume downsample_feature(const FeatureVolume& f, int ratio) {
  const VoxelGrid& g = f.grid;
  VoxelGrid og = g;
  for (int a = 0; a < 3; ++a) {
    og.dims[a] = (g.dims[a] + ratio - 1) / ratio;
    og.spacing_mm[a] = g.spacing_mm[a] * ratio;
  }
  FeatureVolume out{og, std::vector<float>(og.voxel_count())};
  for (int z = 0; z < og.dims[2]; ++z)
    for (int y = 0; y < og.dims[1]; ++y)
      for (int x = 0; x < og.dims[0]; ++x) {
        double acc = 0;
        int cnt = 0;
        for (int dz = 0; dz < ratio; ++dz)
          for (int dy = 0; dy < ratio; ++dy)
            for (int dx = 0; dx < ratio; ++dx) {
              int xx = x * ratio + dx, yy = y * ratio + dy, zz = z * ratio + dz;
              if (xx >= g.dims[0] || yy >= g.dims[1] || zz >= g.dims[2]) continue;
              acc += f.values[g.index(xx, yy, zz)];
              ++cnt;
            }
        out.values[og.index(x, y, z)] = float(cnt ? acc / cnt : 0.0);
      }
  return out;
}

}  // namespace

ScaledTemplate rasterize_scaled(const LiverTemplate& tmpl, double scale, double out_spacing_mm) {
  if (!(scale > 0)) throw std::invalid_argument("rasterize_scaled: scale must be > 0");
  ScaledTemplate t;
  t.spacing_mm = out_spacing_mm;
  std::vector<uint8_t> labels = rasterize_padded(tmpl, scale, out_spacing_mm, t.dims, t.pad);
  encode_runs(labels, t.dims, 1, t.runs);
  encode_runs(labels, t.dims, 2, t.shell_runs);
  double zsum = 0;
  for (const OccRun& r : t.runs) {
    t.popcount += r.x1 - r.x0;
    zsum += double(r.x1 - r.x0) * (r.z + 0.5) * out_spacing_mm;
  }
  if (t.popcount > 0) t.centroid_z_mm = zsum / double(t.popcount);
  return t;
}

NccScorer::NccScorer(FeatureVolume feature) : feat_(std::move(feature)) {
  const VoxelGrid& g = feat_.grid;
  const std::size_t nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  pre1_.assign(ny * nz * (nx + 1), 0.0);
  pre2_.assign(ny * nz * (nx + 1), 0.0);
  for (std::size_t r = 0; r < ny * nz; ++r) {
    const float* src = &feat_.values[r * nx];
    double* p1 = &pre1_[r * (nx + 1)];
    double* p2 = &pre2_[r * (nx + 1)];
    double a1 = 0, a2 = 0;
    p1[0] = p2[0] = 0;
    for (std::size_t x = 0; x < nx; ++x) {
      a1 += src[x];
      a2 += double(src[x]) * src[x];
      p1[x + 1] = a1;
      p2[x + 1] = a2;
    }
  }
}

std::pair<double, double> NccScorer::score(const ScaledTemplate& t,
                                           const std::array<int, 3>& o) const {
  const VoxelGrid& g = feat_.grid;
  const int fnx = g.dims[0], fny = g.dims[1], fnz = g.dims[2];
  int x0 = std::max(0, o[0]), x1 = std::min(fnx, o[0] + t.dims[0]);
  int y0 = std::max(0, o[1]), y1 = std::min(fny, o[1] + t.dims[1]);
  int z0 = std::max(0, o[2]), z1 = std::min(fnz, o[2] + t.dims[2]);
  if (x0 >= x1 || y0 >= y1 || z0 >= z1 || t.popcount == 0) return {-1.0, 0.0};

  const int rowlen = fnx + 1;
  std::int64_t n = 0, s_in = 0;
  double sum_f = 0, sum_f2 = 0, sum_tf = 0;
  auto accumulate = [&](const std::vector<OccRun>& runs, bool interior) {
    for (const OccRun& r : runs) {
      int y = r.y + o[1], z = r.z + o[2];
      if (y < y0 || y >= y1 || z < z0 || z >= z1) continue;
      int a = std::max(r.x0 + o[0], x0), b = std::min(r.x1 + o[0], x1);
      if (b <= a) continue;
      std::size_t row = (std::size_t(z) * fny + y) * rowlen;
      n += b - a;
      sum_f += pre1_[row + b] - pre1_[row + a];
      sum_f2 += pre2_[row + b] - pre2_[row + a];
      if (interior) {
        s_in += b - a;
        sum_tf += pre1_[row + b] - pre1_[row + a];
      }
    }
  };
  accumulate(t.runs, true);
  double vf = double(s_in) / double(t.popcount);
  if (s_in == 0) return {-1.0, 0.0};
  accumulate(t.shell_runs, false);

  double var_t = double(s_in) * (1.0 - double(s_in) / double(n));
  double var_f = sum_f2 - sum_f * sum_f / double(n);
  if (var_t <= 0 || var_f <= 1e-12) return {-1.0, vf};
  double cov = sum_tf - double(s_in) * sum_f / double(n);
  return {cov / std::sqrt(var_t * var_f), vf};
}

std::pair<double, double> ncc_score(const LiverTemplate& tmpl, const FeatureVolume& feat,
                                    const std::array<double, 3>& offset_mm, double scale) {
  if (!(scale > 0)) throw std::invalid_argument("ncc_score: scale must be > 0");
  const VoxelGrid& g = feat.grid;
  const double sp = g.spacing_mm[0];
  std::array<int, 3> dims;
  int pad = 0;
  std::vector<uint8_t> labels = rasterize_padded(tmpl, scale, sp, dims, pad);
  double n = 0, sum_f = 0, sum_f2 = 0, sum_tf = 0;
  std::int64_t s_in = 0, s_total = 0;
  std::size_t i = 0;
  for (int z = 0; z < dims[2]; ++z)
    for (int y = 0; y < dims[1]; ++y)
      for (int x = 0; x < dims[0]; ++x, ++i) {
        if (labels[i] == 0) continue;
        bool set = labels[i] == 1;
        s_total += set;
        double pos[3] = {offset_mm[0] + (x - pad + 0.5) * sp, offset_mm[1] + (y - pad + 0.5) * sp,
                         offset_mm[2] + (z - pad + 0.5) * sp};
        int idx[3];
        bool inside = true;
        for (int a = 0; a < 3; ++a) {
          idx[a] = int(std::floor((pos[a] - g.origin_mm[a]) / g.spacing_mm[a]));
          if (idx[a] < 0 || idx[a] >= g.dims[a]) inside = false;
        }
        if (!inside) continue;
        double f = feat.values[g.index(idx[0], idx[1], idx[2])];
        n += 1;
        sum_f += f;
        sum_f2 += f * f;
        if (set) {
          s_in += 1;
          sum_tf += f;
        }
      }
  double vf = s_total > 0 ? double(s_in) / double(s_total) : 0.0;
  if (n < 2 || s_in == 0) return {-1.0, vf};
  double var_t = double(s_in) * (1.0 - double(s_in) / n);
  double var_f = sum_f2 - sum_f * sum_f / n;
  if (var_t <= 0 || var_f <= 1e-12) return {-1.0, vf};
  double cov = sum_tf - double(s_in) * sum_f / n;
  return {cov / std::sqrt(var_t * var_f), vf};
}

namespace {

struct Cand {
  double penalized = -2.0;
  double score = -2.0;
  double vf = 0.0;
  int tpl = -1;
  double scale = 1.0;
  std::array<double, 3> offset_mm{};
};

// deterministic ordering: best candidate first
bool cand_better(const Cand& a, const Cand& b, const TemplateAtlas& atlas) {
  if (a.tpl < 0 || b.tpl < 0) return b.tpl < 0 && a.tpl >= 0;
  if (a.penalized != b.penalized) return a.penalized > b.penalized;
  if (a.score != b.score) return a.score > b.score;
  const std::string &ia = atlas.templates[a.tpl].id, &ib = atlas.templates[b.tpl].id;
  if (ia != ib) return ia < ib;
  if (a.offset_mm != b.offset_mm) return a.offset_mm < b.offset_mm;
  return a.scale < b.scale;
}

struct ComboResult {
  std::vector<Cand> top;  // sorted, at most K
  double best_rejected = -2.0;
};

void keep_topk(std::vector<Cand>& top, const Cand& c, std::size_t k, const TemplateAtlas& atlas) {
  auto pos = std::upper_bound(top.begin(), top.end(), c,
                              [&](const Cand& a, const Cand& b) { return cand_better(a, b, atlas); });
  top.insert(pos, c);
  if (top.size() > k) top.pop_back();
}

}  // namespace

MatchResult search(const CtVolume& vol, const TemplateAtlas& atlas, double z_lo_mm, double z_hi_mm,
                   const MatcherConfig& cfg) {
  if (atlas.templates.empty()) throw std::invalid_argument("search: empty atlas");
  if (!(z_hi_mm > z_lo_mm)) throw std::invalid_argument("search: empty z range");

  FeatureVolume feat = soft_tissue_feature(vol);
  const double fsp = feat.grid.spacing_mm[0];
  int ratio = std::max(1, int(std::lround(cfg.coarse_step_mm / fsp)));
  FeatureVolume coarse_feat = ratio == 1 ? feat : downsample_feature(feat, ratio);
  NccScorer coarse(std::move(coarse_feat));
  const VoxelGrid& cg = coarse.feature().grid;

  std::vector<double> scales;
  for (double s = cfg.scale_min; s <= cfg.scale_max + 1e-9; s += cfg.scale_step) scales.push_back(s);

  // the coarse pass walks the scale sweep in ~0.1 jumps; the fine pass
  // re-scans +-0.05 around each seed, so the full sweep is still covered
  std::vector<double> coarse_scales;
  int stride = std::max(1, int(std::lround(0.1 / cfg.scale_step)));
  for (std::size_t i = 0; i < scales.size(); i += stride) coarse_scales.push_back(scales[i]);
  if (scales.back() - coarse_scales.back() > 0.05 + 1e-9) coarse_scales.push_back(scales.back());

  const int ntpl = int(atlas.templates.size());
  const int ncombo = ntpl * int(coarse_scales.size());
  std::vector<ComboResult> combo(ncombo);
  const std::size_t kTop = 5;

  parallel_for(ncombo, std::max(1, cfg.threads), [&](int64_t lo, int64_t hi) {
    for (int64_t ci = lo; ci < hi; ++ci) {
      int ti = int(ci) / int(coarse_scales.size());
      double s = coarse_scales[ci % coarse_scales.size()];
      ScaledTemplate occ = rasterize_scaled(atlas.templates[ti], s, cg.spacing_mm[0]);
      if (occ.popcount == 0) continue;
      ComboResult& out = combo[ci];

      // centroid-z window: template liver centroid within z range +- 30 mm
      double zo_lo = z_lo_mm - 30.0 - cg.origin_mm[2] - occ.centroid_z_mm;
      double zo_hi = z_hi_mm + 30.0 - cg.origin_mm[2] - occ.centroid_z_mm;
      int oz0 = std::max(int(std::ceil(zo_lo / cg.spacing_mm[2])), 1 - occ.dims[2]);
      int oz1 = std::min(int(std::floor(zo_hi / cg.spacing_mm[2])), cg.dims[2] - 1);
      double min_n = cfg.visibility_floor * double(occ.popcount);

      for (int oz = oz0; oz <= oz1; ++oz) {
        int cz = std::min(cg.dims[2], oz + occ.dims[2]) - std::max(0, oz);
        if (cz <= 0) continue;
        for (int oy = 1 - occ.dims[1]; oy < cg.dims[1]; oy += 2) {
          int cy = std::min(cg.dims[1], oy + occ.dims[1]) - std::max(0, oy);
          if (cy <= 0 || double(cy) * cz * cg.dims[0] < min_n) continue;
          for (int ox = 1 - occ.dims[0]; ox < cg.dims[0]; ox += 2) {
            int cx = std::min(cg.dims[0], ox + occ.dims[0]) - std::max(0, ox);
            if (cx <= 0 || double(cx) * cy * cz < min_n) continue;
            auto [sc, vf] = coarse.score(occ, {ox, oy, oz});
            if (sc <= -1.0 && vf <= 0) continue;
            if (vf < cfg.visibility_floor) {
              out.best_rejected = std::max(out.best_rejected, sc);
              continue;
            }
            Cand c;
            c.score = sc;
            c.vf = vf;
            c.penalized = sc * std::min(1.0, vf / cfg.visibility_floor);
            c.tpl = ti;
            c.scale = s;
            // template corner in world coordinates
            c.offset_mm = {cg.origin_mm[0] + (ox + occ.pad) * cg.spacing_mm[0],
                           cg.origin_mm[1] + (oy + occ.pad) * cg.spacing_mm[1],
                           cg.origin_mm[2] + (oz + occ.pad) * cg.spacing_mm[2]};
            keep_topk(out.top, c, kTop, atlas);
          }
        }
      }
    }
  });

  std::vector<Cand> seeds;
  double best_rejected = -2.0;
  for (const ComboResult& cr : combo) {
    best_rejected = std::max(best_rejected, cr.best_rejected);
    for (const Cand& c : cr.top) keep_topk(seeds, c, kTop, atlas);
  }

  // local refinement on the fine grid
  NccScorer fine(std::move(feat));
  const VoxelGrid& fg = fine.feature().grid;
  std::map<std::pair<int, long>, ScaledTemplate> occ_cache;
  auto fine_occ = [&](int ti, double s) -> const ScaledTemplate& {
    auto key = std::make_pair(ti, std::lround(s * 1000.0));
    auto it = occ_cache.find(key);
    if (it == occ_cache.end())
      it = occ_cache.emplace(key, rasterize_scaled(atlas.templates[ti], s, fsp)).first;
    return it->second;
  };

  Cand best;
  const int win = std::max(1, int(std::lround(8.0 / fsp)));
  for (const Cand& seed : seeds) {
    for (int ds = -2; ds <= 2; ++ds) {
      double s = seed.scale + ds * 0.025;
      if (s < cfg.scale_min - 1e-9 || s > cfg.scale_max + 1e-9) continue;
      const ScaledTemplate& occ = fine_occ(seed.tpl, s);
      if (occ.popcount == 0) continue;
      std::array<int, 3> o0;
      for (int a = 0; a < 3; ++a)
        o0[a] =
            int(std::lround((seed.offset_mm[a] - fg.origin_mm[a]) / fg.spacing_mm[a])) - occ.pad;
      for (int dz = -win; dz <= win; ++dz)
        for (int dy = -win; dy <= win; ++dy)
          for (int dx = -win; dx <= win; ++dx) {
            std::array<int, 3> o = {o0[0] + dx, o0[1] + dy, o0[2] + dz};
            auto [sc, vf] = fine.score(occ, o);
            if (vf < cfg.visibility_floor) {
              best_rejected = std::max(best_rejected, sc);
              continue;
            }
            Cand c;
            c.score = sc;
            c.vf = vf;
            c.penalized = sc * std::min(1.0, vf / cfg.visibility_floor);
            c.tpl = seed.tpl;
            c.scale = s;
            c.offset_mm = {fg.origin_mm[0] + (o[0] + occ.pad) * fg.spacing_mm[0],
                           fg.origin_mm[1] + (o[1] + occ.pad) * fg.spacing_mm[1],
                           fg.origin_mm[2] + (o[2] + occ.pad) * fg.spacing_mm[2]};
            if (cand_better(c, best, atlas)) best = c;
          }
    }
  }

  MatchResult r;
  if (best.tpl < 0) {
    r.found = false;
    r.best_rejected_score = std::max(0.0, best_rejected);
    return r;
  }
  r.found = true;
  r.template_id = atlas.templates[best.tpl].id;
  r.shape_type = atlas.templates[best.tpl].shape_type;
  r.offset_mm = best.offset_mm;
  r.scale = best.scale;
  r.score = best.score;
  r.visible_fraction = best.vf;
  return r;
}

bool decide(const MatchResult& match, double tau) {
  if (!(tau > 0 && tau < 1)) throw std::invalid_argument("decide: tau must be in (0, 1)");
  return match.found && match.score >= tau;
}

}  // namespace hepato
