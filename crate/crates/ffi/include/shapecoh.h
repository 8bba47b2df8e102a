#ifndef SHAPECOH_H
#define SHAPECOH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum ShcStatus {
  SHC_STATUS_OK = 0,
  SHC_STATUS_NULL_POINTER = 1,
  SHC_STATUS_INVALID_ARGUMENT = 2,
  SHC_STATUS_CONFIG_ERROR = 3,
  SHC_STATUS_NUMERICAL_ERROR = 4,
  SHC_STATUS_BUFFER_TOO_SMALL = 5,
  SHC_STATUS_PANIC = 6,
} ShcStatus;

// A planar polyline, open or closed.
typedef struct ShcCurve ShcCurve;

// Zero-splitting curves from one pipeline run.
typedef struct ShcCurveSet ShcCurveSet;

// A flow system with its parameters.
typedef struct ShcSystem ShcSystem;

// Foliation data at one point.
typedef struct ShcFoliation {
  double fs[2];
  double fu[2];
  // Splitting angle in `[0, π/2]`; NaN when degenerate.
  double theta;
  // Signed splitting; NaN when degenerate.
  double signed_splitting;
  double sigma1_fwd;
  double sigma2_fwd;
  double sigma1_bwd;
  double sigma2_bwd;
  int degenerate;
} ShcFoliation;

// Shape-coherence factor and the registering motion `z ↦ R(angle)z + t`.
typedef struct ShcCoherence {
  double alpha;
  double angle;
  double tx;
  double ty;
  double intersect_area;
  double area_b;
  int under_resolved;
} ShcCoherence;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after success.
// The pointer stays valid until the next call on the same thread.
const char *shc_last_error(void);

// Library version as a static NUL-terminated string.
const char *shc_version(void);

// Create a system by id (`"double_gyre"`, `"rossby_wave"`, `"linear_saddle"`, ...)
// with its default parameters.
//
// # Safety
// `id` must be a NUL-terminated string and `out` a valid pointer.
enum ShcStatus shc_system_new(const char *id, struct ShcSystem **out);

// Override one parameter; unknown names are rejected and leave the system unchanged.
//
// # Safety
// `system` must come from [`shc_system_new`]; `name` must be NUL-terminated.
enum ShcStatus shc_system_set_param(struct ShcSystem *system, const char *name, double value);

// # Safety
// `system` must come from [`shc_system_new`] or be null.
void shc_system_free(struct ShcSystem *system);

// Image of `(x, y)` from `t_a` to `t_b`, written to `out_xy[2]`.
//
// # Safety
// `system` must be a live handle and `out_xy` must hold two doubles.
enum ShcStatus shc_flow_map(const struct ShcSystem *system,
                            double x,
                            double y,
                            double t_a,
                            double t_b,
                            double step,
                            double *out_xy);

// Flow-map Jacobian (row-major, four doubles) from `t_a` to `t_b`.
//
// # Safety
// `system` must be a live handle and `out_jac` must hold four doubles.
enum ShcStatus shc_flow_jacobian(const struct ShcSystem *system,
                                 double x,
                                 double y,
                                 double t_a,
                                 double t_b,
                                 double step,
                                 double *out_jac);

// Stable and unstable foliations at `(x, y)` over `[t0 − T, t0 + T]`.
// A degenerate point is reported in `out`, not as an error.
//
// # Safety
// `system` must be a live handle and `out` a valid pointer.
enum ShcStatus shc_foliation_sample(const struct ShcSystem *system,
                                    double x,
                                    double y,
                                    double t0,
                                    double half_width,
                                    double step,
                                    struct ShcFoliation *out);

// Zero-splitting curves on an `nx × ny` grid over the system's domain.
// `h ≤ 0` picks the continuation step from the grid.
//
// # Safety
// `system` must be a live handle and `out` a valid pointer.
enum ShcStatus shc_zero_curves(const struct ShcSystem *system,
                               double t0,
                               double half_width,
                               size_t nx,
                               size_t ny,
                               double step,
                               double h,
                               struct ShcCurveSet **out);

// Number of curves in the set; 0 for null.
//
// # Safety
// `set` must be a live handle or null.
size_t shc_curve_set_len(const struct ShcCurveSet *set);

// Vertex count, closure flag and largest residual of curve `index`.
//
// # Safety
// `set` must be a live handle; the out pointers must be valid.
enum ShcStatus shc_curve_set_info(const struct ShcCurveSet *set,
                                  size_t index,
                                  size_t *n_vertices,
                                  int *closed,
                                  double *max_residual);

// Copy the vertices of curve `index` into `xy` (room for `capacity` points).
//
// # Safety
// `set` must be a live handle and `xy` must hold `2 * capacity` doubles.
enum ShcStatus shc_curve_set_vertices(const struct ShcCurveSet *set,
                                      size_t index,
                                      double *xy,
                                      size_t capacity);

// # Safety
// `set` must be a live handle or null.
void shc_curve_set_free(struct ShcCurveSet *set);

// Curve from `n` interleaved points.
//
// # Safety
// `xy` must hold `2 * n` doubles and `out` must be valid.
enum ShcStatus shc_curve_new(const double *xy, size_t n, int closed, struct ShcCurve **out);

// Number of vertices; 0 for null.
//
// # Safety
// `curve` must be a live handle or null.
size_t shc_curve_len(const struct ShcCurve *curve);

// # Safety
// `curve` must be a live handle and `xy` must hold `2 * capacity` doubles.
enum ShcStatus shc_curve_vertices(const struct ShcCurve *curve, double *xy, size_t capacity);

// Arc length, including the closing segment of closed curves.
//
// # Safety
// `curve` must be a live handle and `out` valid.
enum ShcStatus shc_curve_length(const struct ShcCurve *curve, double *out);

// Curvature at `n` uniform arc-length samples, written to `kappa[n]`.
//
// # Safety
// `curve` must be a live handle and `kappa` must hold `n` doubles.
enum ShcStatus shc_curvature_profile(const struct ShcCurve *curve, size_t n, double *kappa);

// Image of a curve from `t_a` to `t_b`, refined until neighbouring image
// vertices are within `spacing_tol`.
//
// # Safety
// `system` and `curve` must be live handles and `out` valid.
enum ShcStatus shc_advect_curve(const struct ShcSystem *system,
                                const struct ShcCurve *curve,
                                double t_a,
                                double t_b,
                                double step,
                                double spacing_tol,
                                struct ShcCurve **out);

// # Safety
// `curve` must be a live handle or null.
void shc_curve_free(struct ShcCurve *curve);

// Shape-coherence factor of closed curve `a` advected over
// `[t0 − T, t0 + T]` against `b` (`a` itself when `b` is null).
//
// # Safety
// `system` and `a` must be live handles, `b` live or null, `out` valid.
enum ShcStatus shc_alpha(const struct ShcSystem *system,
                         const struct ShcCurve *a,
                         const struct ShcCurve *b,
                         double t0,
                         double half_width,
                         double step,
                         size_t resolution,
                         size_t n_angles,
                         struct ShcCoherence *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHAPECOH_H */
