#ifndef LPFLOW_H
#define LPFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LpfFlowStatus {
  LPF_FLOW_STATUS_RUNNING = 0,
  LPF_FLOW_STATUS_FROZEN_AT_A0 = 1,
  LPF_FLOW_STATUS_STATIONARY_INITIAL = 2,
  LPF_FLOW_STATUS_CONVERGED = 3,
  LPF_FLOW_STATUS_FAILED = 4,
} LpfFlowStatus;

typedef enum LpfStatus {
  LPF_STATUS_OK = 0,
  LPF_STATUS_INVALID_ARGUMENT = 1,
  LPF_STATUS_CONVEXITY_LOST = 2,
  LPF_STATUS_DEGENERATE_INPUT = 3,
  LPF_STATUS_ITERATION_LIMIT = 4,
  LPF_STATUS_INVALID_COMPLEX = 5,
  LPF_STATUS_NULL_POINTER = 6,
  LPF_STATUS_IO = 7,
  LPF_STATUS_PANIC = 8,
} LpfStatus;

/**
 * Convex body given by support-function samples.
 */
typedef struct LpfBody LpfBody;

/**
 * Finite simplicial complex.
 */
typedef struct LpfComplex LpfComplex;

/**
 * Sampling grid on `S^n`.
 */
typedef struct LpfGrid LpfGrid;

typedef struct LpfEnergy {
  double j;
  double dissipation;
  double vol;
  double ecc;
  double origin_dist;
  double residual;
} LpfEnergy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *lpf_last_error(void);

/**
 * # Safety
 * `out` must be valid for a write.
 */
enum LpfStatus lpf_grid_new(size_t dim, size_t resolution, struct LpfGrid **out);

/**
 * # Safety
 * `grid` must come from [`lpf_grid_new`] and not be used afterwards.
 */
void lpf_grid_free(struct LpfGrid *grid);

/**
 * Number of nodes, or 0 for a null grid.
 *
 * # Safety
 * `grid` must be null or a live grid handle.
 */
size_t lpf_grid_len(const struct LpfGrid *grid);

/**
 * Writes the `n + 1` coordinates of node `i` to `out`.
 *
 * # Safety
 * `out` must hold `n + 1` doubles.
 */
enum LpfStatus lpf_grid_node(const struct LpfGrid *grid, size_t i, double *out);

/**
 * Body of the ellipsoid with the given centre, semi-axes and row-major
 * orthonormal axes, all in `R^{n+1}`.
 *
 * # Safety
 * `center` and `semi_axes` hold `n + 1` doubles, `axes` holds `(n + 1)²`.
 */
enum LpfStatus lpf_body_from_ellipsoid(const struct LpfGrid *grid,
                                       const double *center,
                                       const double *semi_axes,
                                       const double *axes,
                                       struct LpfBody **out);

/**
 * # Safety
 * `values` holds `len` doubles.
 */
enum LpfStatus lpf_body_from_values(const struct LpfGrid *grid,
                                    const double *values,
                                    size_t len,
                                    struct LpfBody **out);

/**
 * # Safety
 * `body` must come from this library and not be used afterwards.
 */
void lpf_body_free(struct LpfBody *body);

/**
 * Copies the support values into `out`, which must have room for the
 * grid's node count.
 *
 * # Safety
 * `out` holds `len` doubles.
 */
enum LpfStatus lpf_body_values(const struct LpfBody *body, double *out, size_t len);

/**
 * # Safety
 * `out` must be valid for a write.
 */
enum LpfStatus lpf_body_volume(const struct LpfBody *body, double *out);

/**
 * # Safety
 * `f` holds `f_len` doubles; `out` must be valid for a write.
 */
enum LpfStatus lpf_energy(const struct LpfBody *body,
                          const double *f,
                          size_t f_len,
                          double p,
                          struct LpfEnergy *out);

/**
 * Raw flow with default step control from `body` up to `t_end`. The final
 * body is returned even when the flow fails; `out_status` and `out_t`
 * report how far it got.
 *
 * # Safety
 * `f` holds `f_len` doubles; the out pointers must be valid for writes.
 */
enum LpfStatus lpf_flow_run(const struct LpfBody *body,
                            const double *f,
                            size_t f_len,
                            double p,
                            double t_end,
                            struct LpfBody **out_body,
                            enum LpfFlowStatus *out_status,
                            double *out_t);

/**
 * Minimum-volume enclosing ellipsoid of `n_points` points in `R^dim`
 * stored row-major. Writes the centre (`dim` values) and the shape matrix
 * `A` of `{x : (x-c)ᵀA(x-c) ≤ 1}` (`dim²` values, row-major).
 *
 * # Safety
 * `points` holds `n_points · dim` doubles; the out buffers are sized as
 * above.
 */
enum LpfStatus lpf_mvee(const double *points,
                        size_t n_points,
                        size_t dim,
                        double tol,
                        double *out_center,
                        double *out_shape);

/**
 * Complex from its JSON form `{"0": [[0], [1]], "1": [[0, 1]]}`.
 *
 * # Safety
 * `json` must be a nul-terminated string.
 */
enum LpfStatus lpf_complex_from_json(const char *json, struct LpfComplex **out);

/**
 * # Safety
 * `complex` must come from this library and not be used afterwards.
 */
void lpf_complex_free(struct LpfComplex *complex);

/**
 * Betti numbers `b_0..b_dim`. `out_len` receives `dim + 1`; at most `cap`
 * values are written.
 *
 * # Safety
 * `out` holds `cap` values; `out_len` must be valid for a write.
 */
enum LpfStatus lpf_complex_betti(const struct LpfComplex *complex,
                                 size_t *out,
                                 size_t cap,
                                 size_t *out_len);

/**
 * Homology profile as JSON `{"k": {"betti": b, "torsion": [..]}}`. Free the
 * string with [`lpf_string_free`].
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum LpfStatus lpf_complex_homology_json(const struct LpfComplex *complex, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void lpf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LPFLOW_H */
