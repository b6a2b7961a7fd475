// scratch harness for calibration runs; not part of the test suite
#include <cstdio>
#include <cstdlib>
#include <string>

#include "atlas.hpp"
#include "densitometry.hpp"
#include "matcher.hpp"
#include "metrics.hpp"
#include "mvol.hpp"
#include "phantom.hpp"
#include "pipeline.hpp"
#include "skeleton.hpp"

using namespace hepato;

static void cmd_lobes() {
  for (int t = 0; t < 6; ++t)
    for (int v = 0; v < 2; ++v) {
      LiverShape s = liver_shape(LiverShapeType(t), v);
      BinaryMask m = rasterize_liver_shape(s);
      LobeExtents e = measure_lobes(m);
      auto type = shape_type_of(classify_right_lobe(e.right_cc_mm),
                                classify_left_lobe(e.left_lateral_mm, e.right_lateral_mm));
      std::printf("type %-4s var %d: cc %.0f right_lat %.0f left_lat %.0f ratio %.2f -> %s\n",
                  shape_type_name(LiverShapeType(t)), v, e.right_cc_mm, e.right_lateral_mm,
                  e.left_lateral_mm, e.left_lateral_mm / e.right_lateral_mm,
                  type ? shape_type_name(*type) : "UNCLASSIFIED");
    }
}

static void run_one(const TemplateAtlas& atlas, const SkeletonTemplate& skel,
                    const PipelineConfig& cfg, const PhantomSpec& spec, const char* tag) {
  auto [vol, truth] = generate_phantom(spec);
  AnatomyMatch am = locate_anatomy(vol, skel);
  GateResult gate = gate_liver(am, skel, vol.grid, cfg.min_overlap);
  std::printf("%s seed %llu: gate score %.3f overlap %.2f present %d", tag,
              (unsigned long long)spec.seed, am.score, am.liver_overlap_fraction,
              int(gate.present));
  if (gate.present) {
    StudyOutcome out = run_study(vol, atlas, skel, cfg, "x", 8);
    double d = out.mask && truth.liver_present ? dice(*out.mask, truth.liver_mask) : 0.0;
    std::printf(" | status %s score %.3f vf %.2f tpl %s dice %.3f", status_name(out.status),
                out.match.found ? out.match.score : out.match.best_rejected_score,
                out.match.visible_fraction, out.match.template_id.c_str(), d);
    for (auto& [k, ms] : out.stage_ms) std::printf(" %s=%.0fms", k.c_str(), ms);
  }
  std::printf("\n");
  std::fflush(stdout);
}

int main(int argc, char** argv) {
  std::string mode = argc > 1 ? argv[1] : "";
  if (mode == "lobes") {
    cmd_lobes();
    return 0;
  }
  TemplateAtlas atlas = generate_reference_atlas(7);
  SkeletonTemplate skel = generate_reference_skeleton();
  PipelineConfig cfg;

  if (mode == "stress") {
    int n = argc > 2 ? std::atoi(argv[2]) : 2;
    for (int s = 0; s < n; ++s) {
      for (double hu : {-5.0, 13.7, 73.0}) {
        PhantomSpec spec;
        spec.seed = 6000 + s;
        spec.liver_hu = hu;
        spec.noise_sigma_hu = 15;
        spec.liver_scale = s % 2 ? 0.85 : 1.15;
        char tag[64];
        std::snprintf(tag, sizeof tag, "hu%+.1f sc%.2f", hu, spec.liver_scale);
        run_one(atlas, skel, cfg, spec, tag);
      }
      PhantomSpec spec;
      spec.kind = PhantomKind::ChestCrop;
      spec.fov_liver_fraction = 0.30;
      spec.seed = 7000 + s;
      run_one(atlas, skel, cfg, spec, "chest30");
    }
    return 0;
  }
  if (mode == "fov") {
    int n = argc > 2 ? std::atoi(argv[2]) : 20;
    for (double fov : {0.45, 0.30}) {
      int gated = 0, detected = 0;
      for (int s = 0; s < n; ++s) {
        PhantomSpec spec;
        spec.kind = PhantomKind::ChestCrop;
        spec.fov_liver_fraction = fov;
        spec.seed = (fov > 0.4 ? 20000 : 30000) + s;
        auto [vol, truth] = generate_phantom(spec);
        AnatomyMatch am = locate_anatomy(vol, skel);
        GateResult gate = gate_liver(am, skel, vol.grid, cfg.min_overlap);
        bool det = false;
        double score = 0, vf = 0;
        if (gate.present) {
          ++gated;
          StudyOutcome out = run_study(vol, atlas, skel, cfg, "x", 8);
          det = out.mask.has_value();
          score = out.match.found ? out.match.score : out.match.best_rejected_score;
          vf = out.match.visible_fraction;
        }
        detected += det;
        std::printf("fov %.2f seed %llu: overlap %.3f gate %d det %d score %.3f vf %.2f\n", fov,
                    (unsigned long long)spec.seed, am.liver_overlap_fraction, int(gate.present),
                    int(det), score, vf);
        std::fflush(stdout);
      }
      std::printf("== fov %.2f: gate %d/%d detected %d/%d\n", fov, gated, n, detected, n);
    }
    return 0;
  }
  if (mode == "scores") {
    int n = argc > 2 ? std::atoi(argv[2]) : 3;
    for (int s = 0; s < n; ++s) {
      PhantomSpec spec;
      spec.seed = 1000 + s;
      spec.liver_hu = 50;
      run_one(atlas, skel, cfg, spec, "body");
    }
    for (int s = 0; s < n; ++s) {
      PhantomSpec spec;
      spec.kind = PhantomKind::ChestCrop;
      spec.fov_liver_fraction = 0.45;
      spec.seed = 2000 + s;
      run_one(atlas, skel, cfg, spec, "chest45");
    }
    for (int s = 0; s < n; ++s) {
      PhantomSpec spec;
      spec.kind = PhantomKind::Head;
      spec.seed = 3000 + s;
      run_one(atlas, skel, cfg, spec, "head");
    }
    for (int s = 0; s < n; ++s) {
      PhantomSpec spec;
      spec.kind = PhantomKind::Limb;
      spec.seed = 4000 + s;
      run_one(atlas, skel, cfg, spec, "limb");
    }
    return 0;
  }
  if (mode == "negsearch") {
    // bypass the gate: what would head/limb scans score if searched anyway?
    int n = argc > 2 ? std::atoi(argv[2]) : 3;
    for (int s = 0; s < n; ++s) {
      for (auto kind : {PhantomKind::Head, PhantomKind::Limb}) {
        PhantomSpec spec;
        spec.kind = kind;
        spec.seed = 5000 + s;
        auto [vol, truth] = generate_phantom(spec);
        MatchResult m = search(vol, atlas, vol.grid.origin_mm[2],
                               vol.grid.origin_mm[2] + vol.grid.extent_mm(2), cfg.matcher(8));
        std::printf("%s seed %d: found %d score %.3f vf %.2f rejected %.3f\n",
                    phantom_kind_name(kind), 5000 + s, int(m.found),
                    m.found ? m.score : -9, m.visible_fraction, m.best_rejected_score);
        std::fflush(stdout);
      }
    }
    return 0;
  }
  if (mode == "study" && argc > 2) {
    CtVolume vol = read_volume(argv[2]);
    StudyOutcome out = run_study(vol, atlas, skel, cfg, "x", 8);
    std::printf("status %s\n", status_name(out.status));
    for (auto& [k, ms] : out.stage_ms) std::printf("  %s %.0f ms\n", k.c_str(), ms);
    std::printf("%s", out.report_text.c_str());
    return 0;
  }
  std::fprintf(stderr, "usage: calib lobes|scores [n]|negsearch [n]|study <mvol>\n");
  return 1;
}
