#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "atlas.hpp"
#include "densitometry.hpp"
#include "matcher.hpp"
#include "metrics.hpp"
#include "refine.hpp"
#include "skeleton.hpp"
#include "volume.hpp"

namespace hepato {

struct PipelineConfig {
  // matcher
  double tau = 0.35;
  double scale_min = 0.80;
  double scale_max = 1.25;
  double scale_step = 0.05;
  double coarse_step_mm = 8.0;
  double visibility_floor = 0.4;
  // anatomy gate
  double min_overlap = 0.4;
  // densitometry
  double hist_erosion_mm = 4.0;
  double mode_smooth_sigma_bins = 3.0;
  double mode_prominence = 0.05;
  double mode_separation_hu = 8.0;
  // refinement
  double mode_gate_sigma = 2.5;
  double max_surface_dist_mm = 15.0;
  double closing_mm = 3.0;
  double seed_erosion_mm = 4.0;
  // orchestration
  int workers = 4;
  bool flip_z = false;
  double pre_smooth_mm = 0.0;
  std::string source;

  void validate() const;  // throws std::invalid_argument

  MatcherConfig matcher(int threads) const;
  DensityConfig density() const;
  RefineConfig refine() const;
};

// `key = value` lines, '#' comments; unknown keys throw std::invalid_argument.
PipelineConfig load_config(const std::string& path);
void set_config_key(PipelineConfig& cfg, const std::string& key, const std::string& value);

enum class StudyStatus { Ok, NoLiver, NotFound, RefineFallback, Error };
const char* status_name(StudyStatus s);

struct StudyOutcome {
  std::string study_id;
  StudyStatus status = StudyStatus::Error;
  std::string message;  // for status error
  GateResult gate;
  MatchResult match;
  std::string report_text;
  std::optional<BinaryMask> mask;  // final mask when detection succeeded
  std::vector<std::pair<std::string, double>> stage_ms;  // executed stages only
};

// gate -> optional pre-smooth -> search -> decide -> densitometry ->
// refine -> remeasure -> render. Never throws for study-level problems;
// they become statuses.
StudyOutcome run_study(const CtVolume& vol, const TemplateAtlas& atlas,
                       const SkeletonTemplate& skeleton, const PipelineConfig& cfg,
                       const std::string& study_id, int search_threads);

struct BatchSummary {
  std::vector<std::pair<std::string, StudyStatus>> studies;  // sorted by id
  int count[5] = {0, 0, 0, 0, 0};  // indexed by StudyStatus
  double wall_s = 0.0;
};

// Source is a directory of *.mvol files (ignoring *.truth.mvol and
// *.mask.mvol) or an http:// base exposing GET /studies and
// GET /studies/<id>.mvol. Writes <id>.mask.mvol, <id>.report.txt and
// batch_summary.txt into out_dir. Throws SourceError if the source
// itself is unreachable; per-study failures become error statuses.
BatchSummary run_batch(const std::string& source, const std::string& out_dir,
                       const TemplateAtlas& atlas, const SkeletonTemplate& skeleton,
                       const PipelineConfig& cfg);

std::string render_batch_summary(const BatchSummary& summary);

struct EvalStats {
  double sensitivity = 0.0;
  double specificity = 0.0;
  double auc = 0.0;
  double dice_mean = 0.0;
  double density_err_std_hu = 0.0;
  double density_err_p95_hu = 0.0;
  double density_err_max_hu = 0.0;
  int n_studies = 0;
  int n_skipped = 0;
};

// Manifest lines: `study_id kind liver_present expected_mean_hu path`.
// Truth masks are looked up next to each study volume as
// <path minus .mvol>.truth.mvol. Missing outputs are counted as skips.
EvalStats evaluate_corpus(const std::string& manifest_path, const std::string& outputs_dir);

std::string render_eval_stats(const EvalStats& stats);

}  // namespace hepato
