/* hepatoscan: volumetric CT liver segmentation and densitometry engine.
 *
 * All functions return HS_OK or an HS_ERR_* code; hs_last_error() gives a
 * thread-local message for the most recent failure on the calling thread.
 * Objects returned through out-parameters are owned by the caller and
 * released with the matching *_free function.
 */
#ifndef HEPATOSCAN_H
#define HEPATOSCAN_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define HS_OK 0
#define HS_ERR_INVALID_ARGUMENT 1
#define HS_ERR_FORMAT 2
#define HS_ERR_IO 3
#define HS_ERR_SOURCE 4
#define HS_ERR_INTERNAL 5

typedef struct hs_volume hs_volume;
typedef struct hs_mask hs_mask;
typedef struct hs_atlas hs_atlas;
typedef struct hs_skeleton hs_skeleton;
typedef struct hs_config hs_config;
typedef struct hs_outcome hs_outcome;

const char* hs_last_error(void);

/* ---- volumes and masks (MVOL files) ---- */
int hs_volume_read(const char* path, hs_volume** out);
int hs_volume_write(const hs_volume* vol, const char* path);
int hs_volume_dims(const hs_volume* vol, int dims[3]);
void hs_volume_free(hs_volume* vol);

int hs_mask_read(const char* path, hs_mask** out);
int hs_mask_write(const hs_mask* mask, const char* path);
void hs_mask_free(hs_mask* mask);

/* ---- synthetic phantom generation ---- */
typedef struct hs_phantom_spec {
  const char* kind; /* "body" | "chest_crop" | "head" | "limb" */
  double liver_hu;
  double noise_sigma_hu;
  double liver_scale;
  double fov_liver_fraction; /* chest_crop only, in (0, 1] */
  uint64_t seed;
  int has_lesion;
  double lesion_hu;
  double lesion_radius_mm;  /* used when lesion_fraction <= 0 */
  double lesion_fraction;   /* target share of liver volume */
} hs_phantom_spec;

/* Fills the spec with generator defaults (body, 50 HU, noise 10, ...). */
void hs_phantom_spec_init(hs_phantom_spec* spec);

/* truth_liver, truth_lesion and liver_present may be NULL when not needed.
 * truth_lesion is set to NULL when the spec has no lesion. */
int hs_phantom_generate(const hs_phantom_spec* spec, hs_volume** vol, hs_mask** truth_liver,
                        hs_mask** truth_lesion, int* liver_present);

/* ---- template atlas and skeleton ---- */
int hs_atlas_generate(uint64_t seed, hs_atlas** out);
int hs_atlas_read(const char* dir, hs_atlas** out);
int hs_atlas_write(const hs_atlas* atlas, const char* dir);
/* Manifest lines: `id mask_file [shape_type]`; paths are relative to the
 * manifest location. Each mask becomes one template. */
int hs_atlas_build(const char* manifest_path, hs_atlas** out);
int hs_atlas_size(const hs_atlas* atlas);
void hs_atlas_free(hs_atlas* atlas);

int hs_skeleton_generate(hs_skeleton** out);
int hs_skeleton_read(const char* path, hs_skeleton** out);
int hs_skeleton_write(const hs_skeleton* skeleton, const char* path);
void hs_skeleton_free(hs_skeleton* skeleton);

/* ---- pipeline configuration (key = value, see docs for the key list) ---- */
int hs_config_create(hs_config** out);
int hs_config_load(const char* path, hs_config** out);
int hs_config_set(hs_config* cfg, const char* key, const char* value);
void hs_config_free(hs_config* cfg);

/* ---- single-study pipeline ---- */
int hs_run_study(const hs_volume* vol, const hs_atlas* atlas, const hs_skeleton* skeleton,
                 const hs_config* cfg, const char* study_id, int threads, hs_outcome** out);

/* "ok" | "no-liver" | "not-found" | "refine-fallback" | "error" */
const char* hs_outcome_status(const hs_outcome* outcome);
const char* hs_outcome_report(const hs_outcome* outcome);
const char* hs_outcome_message(const hs_outcome* outcome);
int hs_outcome_detected(const hs_outcome* outcome);
double hs_outcome_score(const hs_outcome* outcome);
/* Copies the final mask; fails when the study produced none. */
int hs_outcome_mask(const hs_outcome* outcome, hs_mask** out);
void hs_outcome_free(hs_outcome* outcome);

/* ---- batch and evaluation ---- */
int hs_run_batch(const char* source, const char* out_dir, const hs_atlas* atlas,
                 const hs_skeleton* skeleton, const hs_config* cfg);

/* Renders the `metric = value` evaluation block; free with hs_string_free. */
int hs_evaluate(const char* manifest_path, const char* outputs_dir, char** rendered);
void hs_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* HEPATOSCAN_H */
