/* C interface to the cubedn library. All functions return a cdn_status; on
 * failure cdn_last_error() holds a message for the calling thread. Handles are
 * opaque and released with their matching *_free function (NULL is ignored). */
#ifndef CUBEDN_H
#define CUBEDN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define CDN_API __attribute__((visibility("default")))
#else
#define CDN_API
#endif

typedef enum cdn_status {
  CDN_OK = 0,
  CDN_ERR_INVALID_ARGUMENT = 1,
  CDN_ERR_CONFIG = 2,
  CDN_ERR_IO = 3,
  CDN_ERR_SHAPE_MISMATCH = 4,
  CDN_ERR_TARGET_OUT_OF_RANGE = 5,
  CDN_ERR_OUT_OF_FIELD_OF_VIEW = 6,
  CDN_ERR_DIM_MISMATCH = 7,
  CDN_ERR_BAD_MAGIC = 8,
  CDN_ERR_VERSION_MISMATCH = 9,
  CDN_ERR_TRUNCATED_PAYLOAD = 10,
  CDN_ERR_DIVERGENCE = 11,
  CDN_ERR_WINDOW_TOO_LARGE = 12,
  CDN_ERR_NO_CLUSTER = 13,
  CDN_ERR_UNDEFINED_METRIC = 14,
  CDN_ERR_SPEC_MISMATCH = 15,
  CDN_ERR_INTERNAL = 99
} cdn_status;

CDN_API const char* cdn_status_string(cdn_status status);
/* Message of the last failed call on this thread; "" if none. */
CDN_API const char* cdn_last_error(void);
CDN_API const char* cdn_version(void);

typedef enum cdn_log_level { CDN_LOG_INFO = 0, CDN_LOG_WARN = 1, CDN_LOG_ERROR = 2 } cdn_log_level;
typedef void (*cdn_log_fn)(cdn_log_level level, const char* message, void* user);
/* Progress messages of the cdn_cmd_* functions; NULL disables logging. */
CDN_API void cdn_set_log_callback(cdn_log_fn fn, void* user);

/* ---- configuration ---------------------------------------------------- */

typedef struct cdn_config cdn_config;

CDN_API cdn_status cdn_config_default(cdn_config** out);
CDN_API cdn_status cdn_config_parse(const char* json, cdn_config** out);
CDN_API cdn_status cdn_config_load(const char* path, cdn_config** out);
CDN_API void cdn_config_free(cdn_config* cfg);
/* Normalized JSON of the full configuration; the string lives as long as cfg. */
CDN_API const char* cdn_config_json(const cdn_config* cfg);
/* Sets the run, scenario and training seeds. */
CDN_API cdn_status cdn_config_set_seed(cdn_config* cfg, uint64_t seed);
/* Applies a JSON merge patch (RFC 7386) to the configuration and revalidates;
 * cfg is unchanged on failure. */
CDN_API cdn_status cdn_config_merge(cdn_config* cfg, const char* json_patch);
/* Cube dims (doppler, range, angle) of one radar. */
CDN_API cdn_status cdn_config_radar_dims(const cdn_config* cfg, size_t dims[3]);

/* ---- tensors ------------------------------------------------------------ */

typedef struct cdn_cube cdn_cube;

/* New cube of the given dims holding a copy of `values` (row-major, last dim
 * fastest); values may be NULL for zeros. */
CDN_API cdn_status cdn_cube_create(const size_t* dims, size_t rank, const double* values, cdn_cube** out);
CDN_API void cdn_cube_free(cdn_cube* cube);
CDN_API size_t cdn_cube_rank(const cdn_cube* cube);
CDN_API size_t cdn_cube_dim(const cdn_cube* cube, size_t axis);
CDN_API size_t cdn_cube_size(const cdn_cube* cube);
CDN_API const double* cdn_cube_data(const cdn_cube* cube);
/* Stored as float32; values are rounded to float on write. */
CDN_API cdn_status cdn_cube_write(const cdn_cube* cube, const char* path);
CDN_API cdn_status cdn_cube_read(const char* path, cdn_cube** out);

/* ---- processing --------------------------------------------------------- */

/* Simulates one scene (JSON scene document) and returns the horizontal and
 * vertical radar cubes. */
CDN_API cdn_status cdn_simulate_cubes(const cdn_config* cfg, const char* scene_json, cdn_cube** horizontal,
                                      cdn_cube** vertical);
/* Fused (D, R, A, E) cube, normalized as configured. */
CDN_API cdn_status cdn_fuse(const cdn_config* cfg, const cdn_cube* horizontal, const cdn_cube* vertical,
                            cdn_cube** out);
/* Ground-truth confidence cube (2, R, A, E) for the targets of a scene. */
CDN_API cdn_status cdn_ground_truth(const cdn_config* cfg, const char* scene_json, cdn_cube** out);

typedef struct cdn_model cdn_model;

/* Freshly initialized network described by the config. */
CDN_API cdn_status cdn_model_create(const cdn_config* cfg, uint64_t seed, cdn_model** out);
CDN_API cdn_status cdn_model_load(const char* path, cdn_model** out);
CDN_API cdn_status cdn_model_save(const cdn_model* model, const char* path);
CDN_API void cdn_model_free(cdn_model* model);
CDN_API size_t cdn_model_parameter_count(const cdn_model* model);
/* Confidence cube (2, R, A, E) for a fused cube. */
CDN_API cdn_status cdn_model_predict(const cdn_model* model, const cdn_cube* fused, cdn_cube** out);

typedef struct cdn_detection {
  int cls; /* 0 small, 1 large */
  int r, a, e;
  double confidence;
  double x, y, z;
} cdn_detection;

typedef struct cdn_detections cdn_detections;

/* LNMS + overlap filtering of a confidence cube. */
CDN_API cdn_status cdn_detect(const cdn_config* cfg, const cdn_cube* confidence, cdn_detections** out);
/* CFAR + clustering baseline on a radar cube pair; empty when nothing found. */
CDN_API cdn_status cdn_baseline_detect(const cdn_config* cfg, const cdn_cube* horizontal,
                                       const cdn_cube* vertical, cdn_detections** out);
CDN_API size_t cdn_detections_count(const cdn_detections* dets);
CDN_API cdn_status cdn_detections_get(const cdn_detections* dets, size_t index, cdn_detection* out);
CDN_API void cdn_detections_free(cdn_detections* dets);

/* ---- commands ----------------------------------------------------------- */

typedef enum cdn_split { CDN_SPLIT_TRAIN = 0, CDN_SPLIT_VAL = 1, CDN_SPLIT_TEST = 2 } cdn_split;
typedef enum cdn_method { CDN_METHOD_MODEL = 0, CDN_METHOD_BASELINE = 1 } cdn_method;

/* Writes frames/, manifest.json and summary.txt under out_dir. The summary
 * text is returned through summary (may be NULL; free with cdn_string_free). */
CDN_API cdn_status cdn_cmd_simulate(const cdn_config* cfg, const char* out_dir, size_t jobs, char** summary);
CDN_API cdn_status cdn_cmd_train(const cdn_config* cfg, const char* manifest, const char* out_weights);
/* weights may be NULL for the baseline. */
CDN_API cdn_status cdn_cmd_infer(const cdn_config* cfg, cdn_method method, const char* weights,
                                 const char* manifest, cdn_split split, const char* out, size_t jobs);
/* Evaluates up to n detection files; names label the outputs. Agnostic inputs
 * are matched without regard to class (baseline). Report text via report. */
CDN_API cdn_status cdn_cmd_eval(const char* manifest, cdn_split split, const char* const* names,
                                const char* const* detections, const int* class_agnostic, size_t n,
                                const char* out_prefix, char** report);
/* plane: two distinct axis letters, rows first (e.g. RA); axes: one letter per cube dimension or NULL for
 * the default (DRA for rank 3, DRAE for rank 4); sum != 0 selects a sum
 * projection instead of max. Output is a binary PGM image. */
CDN_API cdn_status cdn_cmd_export(const char* cube_path, const char* axes, const char* plane, int sum,
                                  const char* out_image);

CDN_API void cdn_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* CUBEDN_H */
