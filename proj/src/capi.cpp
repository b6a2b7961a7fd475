#include "hepatoscan.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "atlas.hpp"
#include "errors.hpp"
#include "mvol.hpp"
#include "phantom.hpp"
#include "pipeline.hpp"
#include "skeleton.hpp"

using namespace hepato;
namespace fs = std::filesystem;

struct hs_volume {
  CtVolume v;
};
struct hs_mask {
  BinaryMask m;
};
struct hs_atlas {
  TemplateAtlas a;
};
struct hs_skeleton {
  SkeletonTemplate s;
};
struct hs_config {
  PipelineConfig c;
};
struct hs_outcome {
  StudyOutcome o;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return HS_OK;
  } catch (const FormatError& e) {
    g_last_error = e.what();
    return HS_ERR_FORMAT;
  } catch (const IoError& e) {
    g_last_error = e.what();
    return HS_ERR_IO;
  } catch (const SourceError& e) {
    g_last_error = e.what();
    return HS_ERR_SOURCE;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return HS_ERR_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HS_ERR_INTERNAL;
  }
}

int require(bool ok, const char* what) {
  if (ok) return HS_OK;
  g_last_error = what;
  return HS_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* hs_last_error(void) { return g_last_error.c_str(); }

int hs_volume_read(const char* path, hs_volume** out) {
  if (int rc = require(path && out, "null argument")) return rc;
  return guarded([&] { *out = new hs_volume{read_volume(path)}; });
}

int hs_volume_write(const hs_volume* vol, const char* path) {
  if (int rc = require(vol && path, "null argument")) return rc;
  return guarded([&] { write_volume(vol->v, path); });
}

int hs_volume_dims(const hs_volume* vol, int dims[3]) {
  if (int rc = require(vol && dims, "null argument")) return rc;
  for (int a = 0; a < 3; ++a) dims[a] = vol->v.grid.dims[a];
  return HS_OK;
}

void hs_volume_free(hs_volume* vol) { delete vol; }

int hs_mask_read(const char* path, hs_mask** out) {
  if (int rc = require(path && out, "null argument")) return rc;
  return guarded([&] { *out = new hs_mask{read_mask(path)}; });
}

int hs_mask_write(const hs_mask* mask, const char* path) {
  if (int rc = require(mask && path, "null argument")) return rc;
  return guarded([&] { write_mask(mask->m, path); });
}

void hs_mask_free(hs_mask* mask) { delete mask; }

void hs_phantom_spec_init(hs_phantom_spec* spec) {
  if (!spec) return;
  *spec = hs_phantom_spec{};
  spec->kind = "body";
  spec->liver_hu = 50.0;
  spec->noise_sigma_hu = 10.0;
  spec->liver_scale = 1.0;
  spec->fov_liver_fraction = 1.0;
  spec->lesion_hu = 24.0;
}

int hs_phantom_generate(const hs_phantom_spec* spec, hs_volume** vol, hs_mask** truth_liver,
                        hs_mask** truth_lesion, int* liver_present) {
  if (int rc = require(spec && spec->kind && vol, "null argument")) return rc;
  return guarded([&] {
    PhantomSpec ps;
    auto kind = parse_phantom_kind(spec->kind);
    if (!kind) throw std::invalid_argument(std::string("phantom: unknown kind ") + spec->kind);
    ps.kind = *kind;
    ps.liver_hu = spec->liver_hu;
    ps.noise_sigma_hu = spec->noise_sigma_hu;
    ps.liver_scale = spec->liver_scale;
    ps.fov_liver_fraction = spec->fov_liver_fraction;
    ps.seed = spec->seed;
    if (spec->has_lesion) {
      LesionSpec ls;
      ls.hu = spec->lesion_hu;
      ls.radius_mm = spec->lesion_radius_mm;
      ls.fraction = spec->lesion_fraction;
      ps.lesion = ls;
    }
    auto [v, truth] = generate_phantom(ps);
    *vol = new hs_volume{std::move(v)};
    if (truth_liver) *truth_liver = new hs_mask{std::move(truth.liver_mask)};
    if (truth_lesion)
      *truth_lesion = truth.lesion_mask ? new hs_mask{std::move(*truth.lesion_mask)} : nullptr;
    if (liver_present) *liver_present = truth.liver_present ? 1 : 0;
  });
}

int hs_atlas_generate(uint64_t seed, hs_atlas** out) {
  if (int rc = require(out != nullptr, "null argument")) return rc;
  return guarded([&] { *out = new hs_atlas{generate_reference_atlas(seed)}; });
}

int hs_atlas_read(const char* dir, hs_atlas** out) {
  if (int rc = require(dir && out, "null argument")) return rc;
  return guarded([&] { *out = new hs_atlas{read_atlas(dir)}; });
}

int hs_atlas_write(const hs_atlas* atlas, const char* dir) {
  if (int rc = require(atlas && dir, "null argument")) return rc;
  return guarded([&] { write_atlas(atlas->a, dir); });
}

int hs_atlas_build(const char* manifest_path, hs_atlas** out) {
  if (int rc = require(manifest_path && out, "null argument")) return rc;
  return guarded([&] {
    std::ifstream f(manifest_path);
    if (!f) throw IoError(std::string("atlas: cannot open manifest ") + manifest_path);
    fs::path base = fs::path(manifest_path).parent_path();
    TemplateAtlas atlas;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::istringstream is(line);
      std::string id, mask_file, type_name;
      if (!(is >> id)) continue;
      if (!(is >> mask_file))
        throw FormatError("atlas: bad manifest line " + std::to_string(lineno));
      std::optional<LiverShapeType> type;
      if (is >> type_name) {
        type = parse_shape_type(type_name);
        if (!type)
          throw FormatError("atlas: bad shape type at manifest line " + std::to_string(lineno));
      }
      BinaryMask mask = read_mask((base / mask_file).string());
      atlas.templates.push_back(build_template(mask, id, type));
    }
    if (atlas.templates.empty()) throw FormatError("atlas: empty manifest");
    *out = new hs_atlas{std::move(atlas)};
  });
}

int hs_atlas_size(const hs_atlas* atlas) {
  return atlas ? int(atlas->a.templates.size()) : 0;
}

void hs_atlas_free(hs_atlas* atlas) { delete atlas; }

int hs_skeleton_generate(hs_skeleton** out) {
  if (int rc = require(out != nullptr, "null argument")) return rc;
  return guarded([&] { *out = new hs_skeleton{generate_reference_skeleton()}; });
}

int hs_skeleton_read(const char* path, hs_skeleton** out) {
  if (int rc = require(path && out, "null argument")) return rc;
  return guarded([&] { *out = new hs_skeleton{read_skeleton(path)}; });
}

int hs_skeleton_write(const hs_skeleton* skeleton, const char* path) {
  if (int rc = require(skeleton && path, "null argument")) return rc;
  return guarded([&] { write_skeleton(skeleton->s, path); });
}

void hs_skeleton_free(hs_skeleton* skeleton) { delete skeleton; }

int hs_config_create(hs_config** out) {
  if (int rc = require(out != nullptr, "null argument")) return rc;
  return guarded([&] { *out = new hs_config{}; });
}

int hs_config_load(const char* path, hs_config** out) {
  if (int rc = require(path && out, "null argument")) return rc;
  return guarded([&] { *out = new hs_config{load_config(path)}; });
}

int hs_config_set(hs_config* cfg, const char* key, const char* value) {
  if (int rc = require(cfg && key && value, "null argument")) return rc;
  return guarded([&] {
    set_config_key(cfg->c, key, value);
    cfg->c.validate();
  });
}

void hs_config_free(hs_config* cfg) { delete cfg; }

int hs_run_study(const hs_volume* vol, const hs_atlas* atlas, const hs_skeleton* skeleton,
                 const hs_config* cfg, const char* study_id, int threads, hs_outcome** out) {
  if (int rc = require(vol && atlas && skeleton && cfg && study_id && out, "null argument"))
    return rc;
  if (int rc = require(threads >= 1, "threads must be >= 1")) return rc;
  return guarded([&] {
    *out = new hs_outcome{run_study(vol->v, atlas->a, skeleton->s, cfg->c, study_id, threads)};
  });
}

const char* hs_outcome_status(const hs_outcome* outcome) {
  return outcome ? status_name(outcome->o.status) : "";
}

const char* hs_outcome_report(const hs_outcome* outcome) {
  return outcome ? outcome->o.report_text.c_str() : "";
}

const char* hs_outcome_message(const hs_outcome* outcome) {
  return outcome ? outcome->o.message.c_str() : "";
}

int hs_outcome_detected(const hs_outcome* outcome) {
  return outcome && outcome->o.mask.has_value() ? 1 : 0;
}

double hs_outcome_score(const hs_outcome* outcome) {
  if (!outcome) return 0.0;
  const MatchResult& m = outcome->o.match;
  return m.found ? m.score : m.best_rejected_score;
}

int hs_outcome_mask(const hs_outcome* outcome, hs_mask** out) {
  if (int rc = require(outcome && out, "null argument")) return rc;
  if (int rc = require(outcome->o.mask.has_value(), "outcome has no mask")) return rc;
  return guarded([&] { *out = new hs_mask{*outcome->o.mask}; });
}

void hs_outcome_free(hs_outcome* outcome) { delete outcome; }

int hs_run_batch(const char* source, const char* out_dir, const hs_atlas* atlas,
                 const hs_skeleton* skeleton, const hs_config* cfg) {
  if (int rc = require(source && out_dir && atlas && skeleton && cfg, "null argument")) return rc;
  return guarded([&] { run_batch(source, out_dir, atlas->a, skeleton->s, cfg->c); });
}

int hs_evaluate(const char* manifest_path, const char* outputs_dir, char** rendered) {
  if (int rc = require(manifest_path && outputs_dir && rendered, "null argument")) return rc;
  return guarded([&] {
    std::string text = render_eval_stats(evaluate_corpus(manifest_path, outputs_dir));
    char* buf = new char[text.size() + 1];
    text.copy(buf, text.size());
    buf[text.size()] = '\0';
    *rendered = buf;
  });
}

void hs_string_free(char* s) { delete[] s; }

}  // extern "C"
