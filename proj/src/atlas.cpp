#include "atlas.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "errors.hpp"
#include "mvol.hpp"
#include "rng.hpp"

namespace fs = std::filesystem;

namespace hepato {

LobeClass classify_right_lobe(double cc_mm) {
  if (!(cc_mm > 0)) throw std::invalid_argument("classify_right_lobe: cc_mm must be > 0");
  if (cc_mm < 135.0) return LobeClass::Shortened;
  if (cc_mm <= 155.0) return LobeClass::Normal;
  return LobeClass::Elongated;
}

LobeClass classify_left_lobe(double left_extent_mm, double right_extent_mm) {
  if (!(left_extent_mm > 0) || !(right_extent_mm > 0))
    throw std::invalid_argument("classify_left_lobe: extents must be > 0");
  double r = left_extent_mm / right_extent_mm;
  if (r < 0.5) return LobeClass::Shortened;
  if (r <= 0.9) return LobeClass::Normal;
  return LobeClass::Elongated;
}

std::optional<LiverShapeType> shape_type_of(LobeClass right, LobeClass left) {
  if (right == LobeClass::Normal) {
    if (left == LobeClass::Normal) return LiverShapeType::I;
    if (left == LobeClass::Elongated) return LiverShapeType::II;
    return LiverShapeType::III;
  }
  if (right == LobeClass::Elongated) {
    if (left == LobeClass::Normal) return LiverShapeType::IV;
    if (left == LobeClass::Elongated) return LiverShapeType::V;
    return LiverShapeType::VI;
  }
  return std::nullopt;  // shortened right lobe: outside the six-type table
}

std::optional<LiverShapeType> parse_shape_type(const std::string& name) {
  static const std::map<std::string, LiverShapeType> table = {
      {"I", LiverShapeType::I},   {"II", LiverShapeType::II}, {"III", LiverShapeType::III},
      {"IV", LiverShapeType::IV}, {"V", LiverShapeType::V},   {"VI", LiverShapeType::VI}};
  auto it = table.find(name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

LobeExtents measure_lobes(const BinaryMask& mask) {
  const VoxelGrid& g = mask.grid;
  std::vector<std::int64_t> xprof(g.dims[0], 0);
  int x0 = g.dims[0], x1 = -1;
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x)
        if (mask.at(x, y, z)) {
          ++xprof[x];
          x0 = std::min(x0, x);
          x1 = std::max(x1, x);
        }
  if (x1 < 0) throw std::invalid_argument("measure_lobes: empty mask");

  // lightly smooth the profile, then split at the valley between the two
  // tallest local maxima
  std::vector<double> prof(xprof.begin(), xprof.end());
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<double> next = prof;
    for (int x = std::max(x0, 1); x <= std::min(x1, g.dims[0] - 2); ++x)
      next[x] = (prof[x - 1] + prof[x] + prof[x + 1]) / 3.0;
    prof.swap(next);
  }
  std::vector<int> peaks;
  for (int x = x0; x <= x1; ++x) {
    if (x > x0 && prof[x - 1] >= prof[x]) continue;
    int j = x;
    while (j + 1 <= x1 && prof[j + 1] == prof[x]) ++j;
    if (j + 1 <= x1 && prof[j + 1] > prof[x]) continue;
    peaks.push_back(x);
  }
  std::sort(peaks.begin(), peaks.end(), [&](int a, int b) {
    if (prof[a] != prof[b]) return prof[a] > prof[b];
    return a < b;
  });
  int pa, pb;
  if (peaks.size() >= 2) {
    pa = std::min(peaks[0], peaks[1]);
    pb = std::max(peaks[0], peaks[1]);
  } else {
    pa = pb = peaks.empty() ? (x0 + x1) / 2 : peaks[0];
  }
  int valley = pa;
  for (int x = pa; x <= pb; ++x)
    if (prof[x] < prof[valley]) valley = x;

  std::int64_t low_count = 0, high_count = 0;
  for (int x = x0; x <= valley; ++x) low_count += xprof[x];
  for (int x = valley + 1; x <= x1; ++x) high_count += xprof[x];
  bool right_is_low = low_count >= high_count;

  int rx0 = right_is_low ? x0 : valley + 1;
  int rx1 = right_is_low ? valley : x1;
  int lx0 = right_is_low ? valley + 1 : x0;
  int lx1 = right_is_low ? x1 : valley;

  int zmin = g.dims[2], zmax = -1;
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = rx0; x <= rx1; ++x)
        if (mask.at(x, y, z)) {
          zmin = std::min(zmin, z);
          zmax = std::max(zmax, z);
        }

  LobeExtents e;
  e.right_cc_mm = (zmax - zmin + 1) * g.spacing_mm[2];
  e.right_lateral_mm = (rx1 - rx0 + 1) * g.spacing_mm[0];
  e.left_lateral_mm = std::max(0, lx1 - lx0 + 1) * g.spacing_mm[0];
  return e;
}

namespace {

BinaryMask crop_with_margin(const BinaryMask& mask) {
  const VoxelGrid& g = mask.grid;
  int lo[3] = {g.dims[0], g.dims[1], g.dims[2]}, hi[3] = {-1, -1, -1};
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x)
        if (mask.at(x, y, z)) {
          int v[3] = {x, y, z};
          for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], v[a]);
            hi[a] = std::max(hi[a], v[a]);
          }
        }
  if (hi[0] < 0) throw std::invalid_argument("build_template: empty mask");
  VoxelGrid og = g;
  for (int a = 0; a < 3; ++a) {
    int a0 = lo[a] - 1;  // 1-voxel margin, may extend past the input grid
    og.dims[a] = hi[a] - lo[a] + 3;
    og.origin_mm[a] = g.origin_mm[a] + a0 * g.spacing_mm[a];
  }
  BinaryMask out = make_mask(og);
  for (int z = lo[2]; z <= hi[2]; ++z)
    for (int y = lo[1]; y <= hi[1]; ++y)
      for (int x = lo[0]; x <= hi[0]; ++x)
        if (mask.at(x, y, z))
          out.bits[og.index(x - lo[0] + 1, y - lo[1] + 1, z - lo[2] + 1)] = 1;
  return out;
}

}  // namespace

LiverTemplate build_template(const BinaryMask& mask, const std::string& id,
                             std::optional<LiverShapeType> type) {
  if (mask.popcount() == 0) throw std::invalid_argument("build_template: empty mask");
  BinaryMask main = largest_component(mask);
  BinaryMask canon = resample_mask(main, {kCanonicalSpacingMm, kCanonicalSpacingMm, kCanonicalSpacingMm});
  // a very coarse input can lose everything in the occupancy resample
  if (canon.popcount() == 0) throw std::invalid_argument("build_template: mask vanished at canonical spacing");
  canon = largest_component(canon);
  BinaryMask cropped = crop_with_margin(canon);

  LobeExtents ext = measure_lobes(cropped);
  LiverTemplate t;
  t.id = id;
  t.mask = std::move(cropped);
  t.cc_extent_mm = ext.right_cc_mm;
  if (type) {
    t.shape_type = *type;
  } else {
    auto st = shape_type_of(classify_right_lobe(ext.right_cc_mm),
                            classify_left_lobe(ext.left_lateral_mm, ext.right_lateral_mm));
    if (!st)
      throw std::invalid_argument("build_template: lobe extents are outside the six-type table");
    t.shape_type = *st;
  }
  return t;
}

BinaryMask rasterize_liver_shape(const LiverShape& shape, double spacing_mm) {
  std::array<double, 3> lo, hi;
  shape.bounds(1.0, 0.0, lo, hi);
  VoxelGrid g;
  for (int a = 0; a < 3; ++a) {
    g.origin_mm[a] = lo[a] - spacing_mm;
    g.spacing_mm[a] = spacing_mm;
    g.dims[a] = int(std::ceil((hi[a] - lo[a]) / spacing_mm)) + 2;
  }
  BinaryMask m = make_mask(g);
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x)
        if (shape.contains(g.center_mm(0, x), g.center_mm(1, y), g.center_mm(2, z)))
          m.bits[g.index(x, y, z)] = 1;
  return m;
}

TemplateAtlas generate_reference_atlas(uint64_t seed) {
  TemplateAtlas atlas;
  Rng rng(Rng::derive(seed, 0xa71a5));
  static const LiverShapeType types[] = {LiverShapeType::I,  LiverShapeType::II,
                                         LiverShapeType::III, LiverShapeType::IV,
                                         LiverShapeType::V,   LiverShapeType::VI};
  int n = 0;
  for (LiverShapeType t : types) {
    for (int variant = 0; variant < 2; ++variant) {
      LiverShape s = liver_shape(t, variant);
      // mild per-seed size jitter, small enough to stay in each class band
      double jy = rng.uniform(0.985, 1.015);
      double jz = rng.uniform(0.99, 1.01);
      s.right.semi[1] *= jy;
      s.right.semi[2] *= jz;
      s.left.semi[1] *= jy;
      char id[8];
      std::snprintf(id, sizeof(id), "L%02d", ++n);
      atlas.templates.push_back(build_template(rasterize_liver_shape(s), id, t));
    }
  }
  validate_reference(atlas);
  return atlas;
}

void validate_reference(const TemplateAtlas& atlas) {
  std::map<LiverShapeType, int> counts;
  for (const auto& t : atlas.templates) counts[t.shape_type]++;
  if (counts.size() != 6)
    throw FormatError("atlas: reference base must cover all six shape types");
  for (const auto& [t, c] : counts)
    if (c != 2)
      throw FormatError(std::string("atlas: reference base needs exactly two templates of type ") +
                        shape_type_name(t));
}

TemplateAtlas read_atlas(const std::string& dir) {
  fs::path manifest = fs::path(dir) / "atlas.txt";
  std::ifstream f(manifest);
  if (!f) throw IoError("atlas: missing manifest " + manifest.string());

  TemplateAtlas atlas;
  double canonical = -1;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string id, type_name, cc_tok, file;
    if (!(is >> id >> type_name >> cc_tok >> file))
      throw FormatError("atlas: bad manifest line " + std::to_string(lineno));
    auto type = parse_shape_type(type_name);
    if (!type) throw FormatError("atlas: unknown shape_type '" + type_name + "' on line " +
                                 std::to_string(lineno));
    for (const auto& t : atlas.templates)
      if (t.id == id) throw FormatError("atlas: duplicate template id '" + id + "'");

    LiverTemplate t;
    t.id = id;
    t.shape_type = *type;
    t.cc_extent_mm = std::stod(cc_tok);
    t.mask = read_mask((fs::path(dir) / file).string());
    const auto& sp = t.mask.grid.spacing_mm;
    if (sp[0] != sp[1] || sp[1] != sp[2])
      throw FormatError("atlas: template '" + id + "' spacing is not isotropic");
    if (canonical < 0) canonical = sp[0];
    if (sp[0] != canonical)
      throw FormatError("atlas: template '" + id + "' spacing " + format_double(sp[0]) +
                        " mm differs from atlas canonical spacing " + format_double(canonical) + " mm");
    if (t.mask.popcount() == 0) throw FormatError("atlas: template '" + id + "' mask is empty");
    atlas.templates.push_back(std::move(t));
  }
  if (atlas.templates.empty()) throw FormatError("atlas: manifest lists no templates");
  return atlas;
}

void write_atlas(const TemplateAtlas& atlas, const std::string& dir) {
  fs::create_directories(dir);
  std::ostringstream manifest;
  manifest << "# id shape_type cc_extent_mm mask_file\n";
  for (const auto& t : atlas.templates) {
    std::string file = t.id + ".mvol";
    write_mask(t.mask, (fs::path(dir) / file).string());
    manifest << t.id << ' ' << shape_type_name(t.shape_type) << ' ' << format_double(t.cc_extent_mm)
             << ' ' << file << '\n';
  }
  std::ofstream f(fs::path(dir) / "atlas.txt", std::ios::trunc);
  if (!f) throw IoError("atlas: cannot write manifest in " + dir);
  f << manifest.str();
  if (!f.good()) throw IoError("atlas: manifest write failure in " + dir);
}

}  // namespace hepato
