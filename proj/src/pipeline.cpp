#include "pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "errors.hpp"
#include "mvol.hpp"

#include "httplib.h"

namespace fs = std::filesystem;

namespace hepato {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double_value(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad numeric value for " + key + ": " + value);
  }
}

int parse_int_value(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer value for " + key + ": " + value);
  }
}

bool parse_bool_value(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw std::invalid_argument("config: bad boolean value for " + key + ": " + value);
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(tau > 0 && tau < 1)) throw std::invalid_argument("config: tau must be in (0, 1)");
  if (!(scale_min > 0 && scale_min <= scale_max))
    throw std::invalid_argument("config: need 0 < scale_min <= scale_max");
  if (!(scale_step > 0)) throw std::invalid_argument("config: scale_step must be > 0");
  if (!(coarse_step_mm > 0)) throw std::invalid_argument("config: coarse_step_mm must be > 0");
  if (!(visibility_floor > 0 && visibility_floor <= 1))
    throw std::invalid_argument("config: visibility_floor must be in (0, 1]");
  if (!(min_overlap > 0 && min_overlap <= 1))
    throw std::invalid_argument("config: min_overlap must be in (0, 1]");
  if (!(hist_erosion_mm >= 0)) throw std::invalid_argument("config: hist_erosion_mm must be >= 0");
  if (!(mode_smooth_sigma_bins > 0))
    throw std::invalid_argument("config: mode_smooth_sigma_bins must be > 0");
  if (!(mode_prominence > 0 && mode_prominence <= 1))
    throw std::invalid_argument("config: mode_prominence must be in (0, 1]");
  if (!(mode_separation_hu >= 1))
    throw std::invalid_argument("config: mode_separation_hu must be >= 1");
  if (!(mode_gate_sigma > 0)) throw std::invalid_argument("config: mode_gate_sigma must be > 0");
  if (!(max_surface_dist_mm > 0))
    throw std::invalid_argument("config: max_surface_dist_mm must be > 0");
  if (!(closing_mm >= 0)) throw std::invalid_argument("config: closing_mm must be >= 0");
  if (!(seed_erosion_mm >= 0)) throw std::invalid_argument("config: seed_erosion_mm must be >= 0");
  if (workers < 1) throw std::invalid_argument("config: workers must be >= 1");
  if (!(pre_smooth_mm >= 0)) throw std::invalid_argument("config: pre_smooth_mm must be >= 0");
}

MatcherConfig PipelineConfig::matcher(int threads) const {
  MatcherConfig m;
  m.tau = tau;
  m.scale_min = scale_min;
  m.scale_max = scale_max;
  m.scale_step = scale_step;
  m.coarse_step_mm = coarse_step_mm;
  m.visibility_floor = visibility_floor;
  m.threads = threads;
  return m;
}

DensityConfig PipelineConfig::density() const {
  DensityConfig d;
  d.erosion_mm = hist_erosion_mm;
  d.smooth_sigma_bins = mode_smooth_sigma_bins;
  d.prominence = mode_prominence;
  d.separation_hu = mode_separation_hu;
  return d;
}

RefineConfig PipelineConfig::refine() const {
  RefineConfig r;
  r.gate_sigma = mode_gate_sigma;
  r.max_surface_dist_mm = max_surface_dist_mm;
  r.closing_mm = closing_mm;
  r.seed_erosion_mm = seed_erosion_mm;
  return r;
}

void set_config_key(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "tau") cfg.tau = parse_double_value(key, value);
  else if (key == "scale_min") cfg.scale_min = parse_double_value(key, value);
  else if (key == "scale_max") cfg.scale_max = parse_double_value(key, value);
  else if (key == "scale_step") cfg.scale_step = parse_double_value(key, value);
  else if (key == "coarse_step_mm") cfg.coarse_step_mm = parse_double_value(key, value);
  else if (key == "visibility_floor") cfg.visibility_floor = parse_double_value(key, value);
  else if (key == "min_overlap") cfg.min_overlap = parse_double_value(key, value);
  else if (key == "hist_erosion_mm") cfg.hist_erosion_mm = parse_double_value(key, value);
  else if (key == "mode_smooth_sigma_bins") cfg.mode_smooth_sigma_bins = parse_double_value(key, value);
  else if (key == "mode_prominence") cfg.mode_prominence = parse_double_value(key, value);
  else if (key == "mode_separation_hu") cfg.mode_separation_hu = parse_double_value(key, value);
  else if (key == "mode_gate_sigma") cfg.mode_gate_sigma = parse_double_value(key, value);
  else if (key == "max_surface_dist_mm") cfg.max_surface_dist_mm = parse_double_value(key, value);
  else if (key == "closing_mm") cfg.closing_mm = parse_double_value(key, value);
  else if (key == "seed_erosion_mm") cfg.seed_erosion_mm = parse_double_value(key, value);
  else if (key == "workers") cfg.workers = parse_int_value(key, value);
  else if (key == "flip_z") cfg.flip_z = parse_bool_value(key, value);
  else if (key == "pre_smooth_mm") cfg.pre_smooth_mm = parse_double_value(key, value);
  else if (key == "source") cfg.source = value;
  else throw std::invalid_argument("config: unknown key: " + key);
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("config: cannot open " + path);
  PipelineConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: missing '=' at " + path + ":" + std::to_string(lineno));
    set_config_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

const char* status_name(StudyStatus s) {
  switch (s) {
    case StudyStatus::Ok: return "ok";
    case StudyStatus::NoLiver: return "no-liver";
    case StudyStatus::NotFound: return "not-found";
    case StudyStatus::RefineFallback: return "refine-fallback";
    case StudyStatus::Error: return "error";
  }
  return "?";
}

StudyOutcome run_study(const CtVolume& vol, const TemplateAtlas& atlas,
                       const SkeletonTemplate& skeleton, const PipelineConfig& cfg,
                       const std::string& study_id, int search_threads) {
  using clock = std::chrono::steady_clock;
  StudyOutcome out;
  out.study_id = study_id;

  auto timed = [&](const char* stage, auto&& body) {
    auto t0 = clock::now();
    body();
    auto t1 = clock::now();
    out.stage_ms.emplace_back(stage, std::chrono::duration<double, std::milli>(t1 - t0).count());
  };

  try {
    cfg.validate();
    const CtVolume* v = &vol;
    CtVolume flipped;
    if (cfg.flip_z) {
      flipped = flip_z(vol);
      v = &flipped;
    }

    timed("gate", [&] {
      AnatomyMatch am = locate_anatomy(*v, skeleton);
      out.gate = gate_liver(am, skeleton, v->grid, cfg.min_overlap);
    });
    if (!out.gate.present) {
      out.status = StudyStatus::NoLiver;
      out.report_text = render_not_detected(0.0);
      return out;
    }

    CtVolume smoothed;
    if (cfg.pre_smooth_mm > 0) {
      timed("smooth", [&] { smoothed = gaussian_smooth(*v, cfg.pre_smooth_mm); });
      v = &smoothed;
    }

    timed("search", [&] {
      out.match = search(*v, atlas, out.gate.z_lo_mm, out.gate.z_hi_mm, cfg.matcher(search_threads));
    });
    if (!decide(out.match, cfg.tau)) {
      out.status = StudyStatus::NotFound;
      double best = out.match.found ? out.match.score : out.match.best_rejected_score;
      out.report_text = render_not_detected(std::max(0.0, best));
      return out;
    }

    const LiverTemplate* tmpl = nullptr;
    for (const LiverTemplate& t : atlas.templates)
      if (t.id == out.match.template_id) tmpl = &t;
    if (!tmpl) throw std::logic_error("matched template missing from atlas");

    BinaryMask placed;
    DensityReport initial;
    timed("densitometry", [&] {
      placed = place_template(*tmpl, out.match, v->grid);
      initial = measure_density(*v, placed, cfg.density());
    });

    RefinementResult refined;
    DensityReport final_report;
    timed("refine", [&] {
      refined = refine_boundary(*v, placed, initial, cfg.refine());
      final_report = remeasure(*v, refined);
    });

    out.status = refined.fallback ? StudyStatus::RefineFallback : StudyStatus::Ok;
    out.report_text = render_report(final_report, out.match);
    out.mask = cfg.flip_z ? [&] {
      // report the mask in the caller's original slice order
      BinaryMask m = refined.final_mask;
      const VoxelGrid& g = m.grid;
      BinaryMask r = make_mask(vol.grid);
      for (int z = 0; z < g.dims[2]; ++z) {
        std::size_t src = g.index(0, 0, z), dst = vol.grid.index(0, 0, g.dims[2] - 1 - z);
        std::copy_n(m.bits.begin() + src, std::size_t(g.dims[0]) * g.dims[1], r.bits.begin() + dst);
      }
      return r;
    }() : refined.final_mask;
    return out;
  } catch (const std::exception& e) {
    out.status = StudyStatus::Error;
    out.message = e.what();
    return out;
  }
}

namespace {

struct StudySource {
  virtual ~StudySource() = default;
  virtual std::vector<std::string> list() = 0;                      // sorted ids
  virtual CtVolume fetch(const std::string& id) = 0;                // throws on failure
};

struct DirSource : StudySource {
  fs::path dir;
  explicit DirSource(std::string d) : dir(std::move(d)) {}
  std::vector<std::string> list() override {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw SourceError("source: not a directory: " + dir.string());
    std::vector<std::string> ids;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      std::string name = e.path().filename().string();
      if (name.size() < 5 || name.substr(name.size() - 5) != ".mvol") continue;
      if (name.ends_with(".truth.mvol") || name.ends_with(".mask.mvol")) continue;
      ids.push_back(name.substr(0, name.size() - 5));
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }
  CtVolume fetch(const std::string& id) override {
    return read_volume((dir / (id + ".mvol")).string());
  }
};

struct HttpSource : StudySource {
  std::string base;
  explicit HttpSource(std::string b) : base(std::move(b)) {}
  std::vector<std::string> list() override {
    httplib::Client cli(base);
    auto res = cli.Get("/studies");
    if (!res || res->status != 200)
      throw SourceError("source: cannot list studies at " + base);
    std::vector<std::string> ids;
    std::istringstream is(res->body);
    std::string line;
    while (std::getline(is, line)) {
      line = trim(line);
      if (!line.empty()) ids.push_back(line);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }
  CtVolume fetch(const std::string& id) override {
    httplib::Client cli(base);
    auto res = cli.Get("/studies/" + id + ".mvol");
    if (!res || res->status != 200)
      throw IoError("source: fetch failed for " + id +
                    (res ? " (status " + std::to_string(res->status) + ")" : " (no response)"));
    return parse_volume(res->body, id);
  }
};

}  // namespace

BatchSummary run_batch(const std::string& source, const std::string& out_dir,
                       const TemplateAtlas& atlas, const SkeletonTemplate& skeleton,
                       const PipelineConfig& cfg) {
  cfg.validate();
  auto t0 = std::chrono::steady_clock::now();

  std::unique_ptr<StudySource> src;
  if (source.rfind("http://", 0) == 0 || source.rfind("https://", 0) == 0)
    src = std::make_unique<HttpSource>(source);
  else
    src = std::make_unique<DirSource>(source);

  std::vector<std::string> ids = src->list();
  fs::create_directories(out_dir);

  BatchSummary sum;
  sum.studies.resize(ids.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= ids.size()) return;
      const std::string& id = ids[i];
      StudyOutcome out;
      try {
        CtVolume vol = src->fetch(id);
        out = run_study(vol, atlas, skeleton, cfg, id, 1);
        if (out.status != StudyStatus::Error) {
          BinaryMask mask = out.mask ? *out.mask : make_mask(vol.grid);
          write_mask(mask, (fs::path(out_dir) / (id + ".mask.mvol")).string());
          std::ofstream rf(fs::path(out_dir) / (id + ".report.txt"),
                           std::ios::binary | std::ios::trunc);
          rf << out.report_text;
          if (!rf.good()) throw IoError("batch: cannot write report for " + id);
        }
      } catch (const std::exception& e) {
        out.study_id = id;
        out.status = StudyStatus::Error;
        out.message = e.what();
      }
      sum.studies[i] = {id, out.status};
    }
  };

  int nworkers = std::max(1, std::min<int>(cfg.workers, int(std::max<std::size_t>(ids.size(), 1))));
  std::vector<std::thread> pool;
  for (int w = 1; w < nworkers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  for (const auto& [id, st] : sum.studies) sum.count[int(st)] += 1;
  sum.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::ofstream sf(fs::path(out_dir) / "batch_summary.txt", std::ios::binary | std::ios::trunc);
  sf << render_batch_summary(sum);
  if (!sf.good()) throw IoError("batch: cannot write batch_summary.txt");
  return sum;
}

std::string render_batch_summary(const BatchSummary& s) {
  std::string out;
  out += "studies: " + std::to_string(s.studies.size()) + "\n";
  for (int i = 0; i < 5; ++i)
    out += std::string(status_name(StudyStatus(i))) + ": " + std::to_string(s.count[i]) + "\n";
  out += "wall_s: " + format_fixed(s.wall_s, 1) + "\n";
  double per_min = s.wall_s > 0 ? double(s.studies.size()) * 60.0 / s.wall_s : 0.0;
  out += "studies_per_min: " + format_fixed(per_min, 1) + "\n";
  return out;
}

namespace {

struct ParsedReport {
  bool detected = false;
  double score = 0.0;
  double dominant_mean_hu = 0.0;
};

ParsedReport parse_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("evaluate: cannot open " + path);
  ParsedReport r;
  std::string line;
  if (!std::getline(f, line) || line != "LIVER REPORT")
    throw FormatError("evaluate: bad report " + path);
  while (std::getline(f, line)) {
    std::istringstream is(line);
    std::string word;
    is >> word;
    if (word == "detected:") {
      std::string v;
      is >> v;
      r.detected = v == "yes";
    } else if (word == "template:") {
      std::string tok;
      while (is >> tok)
        if (tok == "score:") {
          if (!(is >> r.score)) throw FormatError("evaluate: bad score in " + path);
        }
    } else if (word == "best_score:") {
      if (!(is >> r.score)) throw FormatError("evaluate: bad best_score in " + path);
    } else if (word == "mode") {
      std::string idx, tag;
      if (is >> idx >> tag && idx == "1:" && tag == "mean_hu") {
        if (!(is >> r.dominant_mean_hu)) throw FormatError("evaluate: bad mode line in " + path);
      }
    }
  }
  return r;
}

}  // namespace

EvalStats evaluate_corpus(const std::string& manifest_path, const std::string& outputs_dir) {
  std::ifstream mf(manifest_path);
  if (!mf) throw IoError("evaluate: cannot open manifest " + manifest_path);

  struct Entry {
    std::string id, kind, path;
    bool liver_present;
    double expected_mean_hu;
  };
  std::vector<Entry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(mf, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::istringstream is(line);
    Entry e;
    std::string present;
    if (!(is >> e.id >> e.kind >> present >> e.expected_mean_hu >> e.path))
      throw FormatError("evaluate: bad manifest line " + std::to_string(lineno));
    if (present == "1" || present == "true" || present == "yes") e.liver_present = true;
    else if (present == "0" || present == "false" || present == "no") e.liver_present = false;
    else throw FormatError("evaluate: bad liver_present at line " + std::to_string(lineno));
    entries.push_back(std::move(e));
  }

  EvalStats st;
  std::vector<bool> detections, labels;
  std::vector<double> scores;
  std::vector<double> pred_means, truth_means;
  std::vector<double> dices;

  for (const Entry& e : entries) {
    fs::path report_path = fs::path(outputs_dir) / (e.id + ".report.txt");
    std::error_code ec;
    if (!fs::exists(report_path, ec)) {
      ++st.n_skipped;
      continue;
    }
    ParsedReport r = parse_report(report_path.string());
    ++st.n_studies;
    detections.push_back(r.detected);
    labels.push_back(e.liver_present);
    scores.push_back(r.score);
    if (e.liver_present && r.detected) {
      pred_means.push_back(r.dominant_mean_hu);
      truth_means.push_back(e.expected_mean_hu);
    }
    if (e.liver_present && e.path.size() > 5) {
      std::string truth_path = e.path.substr(0, e.path.size() - 5) + ".truth.mvol";
      fs::path mask_path = fs::path(outputs_dir) / (e.id + ".mask.mvol");
      if (fs::exists(truth_path, ec) && fs::exists(mask_path, ec))
        dices.push_back(dice(read_mask(mask_path.string()), read_mask(truth_path)));
    }
  }

  bool have_pos = std::count(labels.begin(), labels.end(), true) > 0;
  bool have_neg = std::count(labels.begin(), labels.end(), false) > 0;
  if (have_pos && have_neg) {
    SensSpec ss = sens_spec(detections, labels);
    st.sensitivity = ss.sensitivity;
    st.specificity = ss.specificity;
    st.auc = roc_auc(scores, labels);
  } else if (have_pos || have_neg) {
    std::int64_t hit = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (detections[i] == labels[i]) ++hit;
    double rate = labels.empty() ? 0.0 : double(hit) / double(labels.size());
    if (have_pos) st.sensitivity = rate;
    if (have_neg) st.specificity = rate;
  }
  if (!dices.empty()) {
    double s = 0;
    for (double d : dices) s += d;
    st.dice_mean = s / double(dices.size());
  }
  if (!pred_means.empty()) {
    DensityErrorStats de = density_error_stats(pred_means, truth_means);
    st.density_err_std_hu = de.std_hu;
    st.density_err_p95_hu = de.p95_hu;
    st.density_err_max_hu = de.max_hu;
  }
  return st;
}

std::string render_eval_stats(const EvalStats& s) {
  std::string out;
  out += "sensitivity = " + format_double(s.sensitivity) + "\n";
  out += "specificity = " + format_double(s.specificity) + "\n";
  out += "auc = " + format_double(s.auc) + "\n";
  out += "dice_mean = " + format_double(s.dice_mean) + "\n";
  out += "density_err_std_hu = " + format_double(s.density_err_std_hu) + "\n";
  out += "density_err_p95_hu = " + format_double(s.density_err_p95_hu) + "\n";
  out += "density_err_max_hu = " + format_double(s.density_err_max_hu) + "\n";
  out += "n_studies = " + std::to_string(s.n_studies) + "\n";
  out += "n_skipped = " + std::to_string(s.n_skipped) + "\n";
  return out;
}

}  // namespace hepato
