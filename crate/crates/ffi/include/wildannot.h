#ifndef WILDANNOT_H
#define WILDANNOT_H

/* Generated by cbindgen from wildannot-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible API call.
typedef enum WaStatus {
  WA_OK = 0,
  WA_NULL_POINTER = 1,
  WA_INVALID_ARGUMENT = 2,
  WA_PARSE_ERROR = 3,
  WA_IO_ERROR = 4,
  WA_OUT_OF_RANGE = 5,
  WA_RUNTIME_ERROR = 6,
} WaStatus;

// Opaque point-cloud map handle.
typedef struct WaMap WaMap;

// Opaque camera-rig handle.
typedef struct WaRig WaRig;

// Opaque trajectory handle.
typedef struct WaTrajectory WaTrajectory;

// A pose sample: translation plus quaternion in (x, y, z, w) order.
typedef struct WaPose {
  double translation[3];
  double quaternion_xyzw[4];
  double timestamp;
} WaPose;

// Annotation tuning; `wa_annotate_params_default` fills the defaults.
typedef struct WaAnnotateParams {
  double gamma;
  double crop_radius;
  double normal_radius;
  uint32_t min_neighbors;
} WaAnnotateParams;

// Aggregate annotation outcome.
typedef struct WaAnnotateStats {
  uint64_t frames_written;
  uint64_t frames_skipped;
  uint64_t candidates;
  uint64_t after_frustum;
  uint64_t after_backface;
  uint64_t visible;
} WaAnnotateStats;

// Depth metrics over jointly valid pixels.
typedef struct WaDepthMetrics {
  double delta1;
  double abs_rel;
  double rmse;
  uint64_t pixel_count;
} WaDepthMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent error on this thread. The pointer stays
// valid until the next failing call on the same thread.
const char *wa_last_error_message(void);

// ABI version; bumped on breaking layout changes.
uint32_t wa_abi_version(void);

// Load a point-cloud map from a PLY file.
//
// # Safety
// `path` must be a NUL-terminated UTF-8 string and `out` a valid pointer.
enum WaStatus wa_map_load_ply(const char *path, struct WaMap **out);

// # Safety
// `map` must come from `wa_map_load_ply` and not be freed twice.
void wa_map_free(struct WaMap *map);

// # Safety
// `map` must be a live handle (or null, which reports zero).
size_t wa_map_point_count(const struct WaMap *map);

// Load a trajectory CSV (`timestamp,x,y,z,qx,qy,qz,qw`).
//
// # Safety
// `path` must be a NUL-terminated UTF-8 string and `out` a valid pointer.
enum WaStatus wa_trajectory_load_csv(const char *path, struct WaTrajectory **out);

// # Safety
// `trajectory` must come from `wa_trajectory_load_csv`.
void wa_trajectory_free(struct WaTrajectory *trajectory);

// First and last pose timestamps.
//
// # Safety
// All pointers must be valid.
enum WaStatus wa_trajectory_span(const struct WaTrajectory *trajectory,
                                 double *t_first,
                                 double *t_last);

// Interpolate the trajectory at time `t` (slerp rotation, linear
// translation).
//
// # Safety
// All pointers must be valid.
enum WaStatus wa_trajectory_interpolate(const struct WaTrajectory *trajectory,
                                        double t,
                                        struct WaPose *out);

// Load a camera rig JSON.
//
// # Safety
// `path` must be a NUL-terminated UTF-8 string and `out` a valid pointer.
enum WaStatus wa_rig_load_json(const char *path, struct WaRig **out);

// # Safety
// `rig` must come from `wa_rig_load_json`.
void wa_rig_free(struct WaRig *rig);

// Defaults for [`WaAnnotateParams`].
struct WaAnnotateParams wa_annotate_params_default(void);

// Annotate a frame sequence: writes `depth/<ns>.png`, `normal/<ns>.png`
// and `frames.json` under `out_dir/<sequence_label>`.
//
// # Safety
// Handles must be live; `timestamps` must point to `count` doubles;
// strings must be NUL-terminated UTF-8. `params` and `stats` may be null.
enum WaStatus wa_annotate_sequence(const struct WaMap *map,
                                   const struct WaTrajectory *trajectory,
                                   const struct WaRig *rig,
                                   const double *timestamps,
                                   size_t count,
                                   const char *sequence_label,
                                   const char *out_dir,
                                   const struct WaAnnotateParams *params,
                                   struct WaAnnotateStats *stats);

// Depth metrics between two 16-bit depth PNGs (prediction vs ground
// truth). `literal_delta1 != 0` scores |pred-gt|/gt <= 0.25 instead of
// the max-ratio form.
//
// # Safety
// Paths must be NUL-terminated UTF-8 strings; `out` must be valid.
enum WaStatus wa_depth_metrics_from_files(const char *pred_png,
                                          const char *gt_png,
                                          int32_t literal_delta1,
                                          struct WaDepthMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WILDANNOT_H */
