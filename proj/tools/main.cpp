#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "hepatoscan.h"

namespace fs = std::filesystem;

namespace {

int exit_code_for(int rc) {
  switch (rc) {
    case HS_OK: return 0;
    case HS_ERR_INVALID_ARGUMENT: return 1;
    case HS_ERR_SOURCE: return 3;
    default: return 2;  // format, I/O, internal
  }
}

int fail(int rc) {
  std::fprintf(stderr, "error: %s\n", hs_last_error());
  return exit_code_for(rc);
}

struct ConfigHandle {
  hs_config* cfg = nullptr;
  ~ConfigHandle() { hs_config_free(cfg); }
};

int load_config_or_default(const std::string& path, ConfigHandle& h) {
  return path.empty() ? hs_config_create(&h.cfg) : hs_config_load(path.c_str(), &h.cfg);
}

std::string study_id_of(const std::string& in_path) {
  std::string stem = fs::path(in_path).filename().string();
  if (stem.size() > 5 && stem.substr(stem.size() - 5) == ".mvol") stem.resize(stem.size() - 5);
  return stem;
}

int cmd_segment(const std::string& in, const std::string& atlas_dir, const std::string& skel_path,
                const std::string& config_path, const std::string& out_dir, int threads) {
  hs_volume* vol = nullptr;
  hs_atlas* atlas = nullptr;
  hs_skeleton* skel = nullptr;
  hs_outcome* outcome = nullptr;
  ConfigHandle cfg;
  int rc;
  if ((rc = load_config_or_default(config_path, cfg))) return fail(rc);
  if ((rc = hs_volume_read(in.c_str(), &vol))) return fail(rc);
  if ((rc = hs_atlas_read(atlas_dir.c_str(), &atlas))) return fail(rc);
  if ((rc = hs_skeleton_read(skel_path.c_str(), &skel))) return fail(rc);

  std::string id = study_id_of(in);
  rc = hs_run_study(vol, atlas, skel, cfg.cfg, id.c_str(), threads, &outcome);
  hs_volume_free(vol);
  hs_atlas_free(atlas);
  hs_skeleton_free(skel);
  if (rc) return fail(rc);

  std::string status = hs_outcome_status(outcome);
  if (status == "error") {
    std::fprintf(stderr, "error: %s\n", hs_outcome_message(outcome));
    hs_outcome_free(outcome);
    return 2;
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  std::ofstream rf(fs::path(out_dir) / (id + ".report.txt"), std::ios::binary | std::ios::trunc);
  rf << hs_outcome_report(outcome);
  if (!rf.good()) {
    std::fprintf(stderr, "error: cannot write report\n");
    hs_outcome_free(outcome);
    return 2;
  }
  rf.close();
  if (hs_outcome_detected(outcome)) {
    hs_mask* mask = nullptr;
    if ((rc = hs_outcome_mask(outcome, &mask)) == HS_OK) {
      std::string mpath = (fs::path(out_dir) / (id + ".mask.mvol")).string();
      rc = hs_mask_write(mask, mpath.c_str());
      hs_mask_free(mask);
    }
    if (rc) {
      hs_outcome_free(outcome);
      return fail(rc);
    }
  }
  std::printf("%s: %s\n", id.c_str(), status.c_str());
  hs_outcome_free(outcome);
  return 0;
}

int cmd_batch(const std::string& source, const std::string& atlas_dir, const std::string& skel_path,
              const std::string& config_path, int workers, const std::string& out_dir) {
  hs_atlas* atlas = nullptr;
  hs_skeleton* skel = nullptr;
  ConfigHandle cfg;
  int rc;
  if ((rc = load_config_or_default(config_path, cfg))) return fail(rc);
  if (workers > 0 &&
      (rc = hs_config_set(cfg.cfg, "workers", std::to_string(workers).c_str())))
    return fail(rc);
  if ((rc = hs_atlas_read(atlas_dir.c_str(), &atlas))) return fail(rc);
  if ((rc = hs_skeleton_read(skel_path.c_str(), &skel))) return fail(rc);

  rc = hs_run_batch(source.c_str(), out_dir.c_str(), atlas, skel, cfg.cfg);
  hs_atlas_free(atlas);
  hs_skeleton_free(skel);
  if (rc) return fail(rc);
  std::printf("batch complete: %s\n", out_dir.c_str());
  return 0;
}

int cmd_phantom(const hs_phantom_spec& spec, const std::string& out_file,
                const std::string& truth_dir) {
  hs_volume* vol = nullptr;
  hs_mask* liver = nullptr;
  hs_mask* lesion = nullptr;
  int liver_present = 0;
  int rc = hs_phantom_generate(&spec, &vol, &liver, &lesion, &liver_present);
  if (rc) return fail(rc);

  rc = hs_volume_write(vol, out_file.c_str());
  hs_volume_free(vol);
  if (rc == HS_OK && !truth_dir.empty() && liver_present) {
    std::error_code ec;
    fs::create_directories(truth_dir, ec);
    std::string stem = study_id_of(out_file);
    std::string lpath = (fs::path(truth_dir) / (stem + ".truth.mvol")).string();
    rc = hs_mask_write(liver, lpath.c_str());
    if (rc == HS_OK && lesion) {
      std::string spath = (fs::path(truth_dir) / (stem + ".lesion.mvol")).string();
      rc = hs_mask_write(lesion, spath.c_str());
    }
  }
  hs_mask_free(liver);
  hs_mask_free(lesion);
  return rc ? fail(rc) : 0;
}

int cmd_atlas_build(bool generate, uint64_t seed, const std::string& masks_manifest,
                    const std::string& out_dir) {
  hs_atlas* atlas = nullptr;
  int rc;
  if (generate)
    rc = hs_atlas_generate(seed, &atlas);
  else
    rc = hs_atlas_build(masks_manifest.c_str(), &atlas);
  if (rc) return fail(rc);

  rc = hs_atlas_write(atlas, out_dir.c_str());
  hs_atlas_free(atlas);
  if (rc) return fail(rc);

  if (generate) {
    // ship the matching anatomy skeleton next to the reference atlas
    hs_skeleton* skel = nullptr;
    if ((rc = hs_skeleton_generate(&skel))) return fail(rc);
    std::string spath = (fs::path(out_dir) / "skeleton.txt").string();
    rc = hs_skeleton_write(skel, spath.c_str());
    hs_skeleton_free(skel);
    if (rc) return fail(rc);
  }
  std::printf("atlas written: %s\n", out_dir.c_str());
  return 0;
}

int cmd_evaluate(const std::string& manifest, const std::string& outputs,
                 const std::string& out_file) {
  char* rendered = nullptr;
  int rc = hs_evaluate(manifest.c_str(), outputs.c_str(), &rendered);
  if (rc) return fail(rc);
  std::ofstream f(out_file, std::ios::binary | std::ios::trunc);
  f << rendered;
  bool ok = f.good();
  std::fputs(rendered, stdout);
  hs_string_free(rendered);
  if (!ok) {
    std::fprintf(stderr, "error: cannot write %s\n", out_file.c_str());
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"volumetric CT liver segmentation and densitometry"};
  app.require_subcommand(1);

  // segment
  std::string in, atlas_dir, skel_path, config_path, out_dir;
  int threads = 4;
  auto* segment = app.add_subcommand("segment", "run the pipeline on one study");
  segment->add_option("--in", in, "input volume (.mvol)")->required();
  segment->add_option("--atlas", atlas_dir, "template atlas directory")->required();
  segment->add_option("--skeleton", skel_path, "skeleton template file")->required();
  segment->add_option("--config", config_path, "pipeline config file");
  segment->add_option("--threads", threads, "search threads")->check(CLI::PositiveNumber);
  segment->add_option("--out", out_dir, "output directory")->required();

  // batch
  std::string source;
  int workers = 0;
  auto* batch = app.add_subcommand("batch", "process a study corpus");
  batch->add_option("--source", source, "directory of .mvol files or http:// base URL")->required();
  batch->add_option("--atlas", atlas_dir, "template atlas directory")->required();
  batch->add_option("--skeleton", skel_path, "skeleton template file")->required();
  batch->add_option("--config", config_path, "pipeline config file");
  batch->add_option("--workers", workers, "worker pool size")->check(CLI::PositiveNumber);
  batch->add_option("--out", out_dir, "output directory")->required();

  // phantom
  hs_phantom_spec spec;
  hs_phantom_spec_init(&spec);
  std::string kind = "body", out_file, truth_dir;
  uint64_t seed = 0;
  double lesion_hu = 24.0, lesion_radius = 0.0, lesion_fraction = 0.0;
  bool with_lesion = false;
  auto* phantom = app.add_subcommand("phantom", "generate a synthetic study");
  phantom->add_option("--kind", kind, "body|chest_crop|head|limb")->required();
  phantom->add_option("--seed", seed, "generator seed")->required();
  phantom->add_option("--liver-hu", spec.liver_hu, "mean liver radiodensity");
  phantom->add_option("--noise", spec.noise_sigma_hu, "noise sigma (HU)");
  phantom->add_option("--scale", spec.liver_scale, "liver size scale");
  phantom->add_option("--fov-fraction", spec.fov_liver_fraction, "liver fraction kept (chest_crop)");
  phantom->add_flag("--lesion", with_lesion, "embed a spherical lesion");
  phantom->add_option("--lesion-hu", lesion_hu, "lesion radiodensity")->needs("--lesion");
  phantom->add_option("--lesion-radius", lesion_radius, "lesion radius (mm)")->needs("--lesion");
  phantom->add_option("--lesion-fraction", lesion_fraction, "lesion share of liver volume")
      ->needs("--lesion");
  phantom->add_option("--out", out_file, "output volume file")->required();
  phantom->add_option("--truth", truth_dir, "directory for truth masks");

  // atlas-build
  bool generate = false;
  std::string masks_manifest;
  auto* atlas_build = app.add_subcommand("atlas-build", "build a template atlas");
  atlas_build->add_flag("--generate", generate, "generate the reference atlas and skeleton");
  atlas_build->add_option("--seed", seed, "generator seed");
  atlas_build->add_option("--masks", masks_manifest, "manifest of segmentation masks");
  atlas_build->add_option("--out", out_dir, "output directory")->required();

  // evaluate
  std::string manifest, outputs;
  auto* evaluate = app.add_subcommand("evaluate", "score batch outputs against a corpus manifest");
  evaluate->add_option("--manifest", manifest, "corpus manifest file")->required();
  evaluate->add_option("--outputs", outputs, "batch output directory")->required();
  evaluate->add_option("--out", out_file, "statistics output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  if (segment->parsed())
    return cmd_segment(in, atlas_dir, skel_path, config_path, out_dir, threads);
  if (batch->parsed())
    return cmd_batch(source, atlas_dir, skel_path, config_path, workers, out_dir);
  if (phantom->parsed()) {
    spec.kind = kind.c_str();
    spec.seed = seed;
    if (with_lesion) {
      spec.has_lesion = 1;
      spec.lesion_hu = lesion_hu;
      spec.lesion_radius_mm = lesion_radius;
      spec.lesion_fraction = lesion_fraction;
    }
    return cmd_phantom(spec, out_file, truth_dir);
  }
  if (atlas_build->parsed()) {
    if (generate == masks_manifest.empty() && !generate) {
      std::fprintf(stderr, "error: atlas-build needs --generate or --masks\n");
      return 1;
    }
    if (generate && !masks_manifest.empty()) {
      std::fprintf(stderr, "error: --generate and --masks are exclusive\n");
      return 1;
    }
    return cmd_atlas_build(generate, seed, masks_manifest, out_dir);
  }
  if (evaluate->parsed()) return cmd_evaluate(manifest, outputs, out_file);
  return 1;
}
