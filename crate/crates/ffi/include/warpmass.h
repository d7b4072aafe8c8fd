#ifndef WARPMASS_H
#define WARPMASS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum WmStatus {
  WM_STATUS_OK = 0,
  WM_STATUS_NULL_POINTER = 1,
  WM_STATUS_INVALID_INPUT = 2,
  WM_STATUS_HYPOTHESIS_VIOLATED = 3,
  WM_STATUS_TRUNCATION_ERROR = 4,
  WM_STATUS_NUMERICAL_FAILURE = 5,
  WM_STATUS_PANIC = 6,
} WmStatus;

// Green function mode table built from a model.
typedef struct WmGreenTable WmGreenTable;

// Warped-product model `S^n(R) x S^k x (0, inf)` with `f = sinh(c r)/c`.
typedef struct WmModel WmModel;

// Hypothesis checks of a model; margins are NaN when they cannot be evaluated.
typedef struct WmConditions {
  bool cond_main_1;
  double cond_main_1_margin;
  double d;
  bool vgl;
  double vgl_margin;
  bool cond_main;
  double cond_main_margin;
  double alpha_plus;
  double alpha_minus;
  double beta;
  bool all_hypotheses;
} WmConditions;

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len - 1` bytes) and returns its full length without the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t wm_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *wm_version(void);

// Creates `S^n(radius) x H_c^{k+1}`; `n = 0` gives a point factor.
//
// # Safety
// `out` must be a valid pointer; on success it receives a handle owned by the caller.
enum WmStatus wm_model_sphere_hyperbolic(size_t n,
                                         double radius,
                                         size_t k,
                                         double c,
                                         struct WmModel **out);

// Releases a model; null is ignored.
//
// # Safety
// `model` must be null or a handle from [`wm_model_sphere_hyperbolic`] not yet freed.
void wm_model_free(struct WmModel *model);

// Total dimension `m = n + k + 1`, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t wm_model_dimension(const struct WmModel *model);

// Evaluates the decay and positivity hypotheses with slack `epsilon`.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum WmStatus wm_conditions(const struct WmModel *model, double epsilon, struct WmConditions *out);

// Predicted and fitted decay rate of the scalar mode with `Delta^N u = mu u`,
// integrated to `t_far` and fitted on `[0.5, 0.9] t_far`.
//
// # Safety
// `model` must be a live handle; `predicted` and `fitted` valid pointers.
enum WmStatus wm_scalar_decay_rate(const struct WmModel *model,
                                   double mu,
                                   double t_far,
                                   double *predicted,
                                   double *fitted);

// Builds the Green mode table with modes `0..=truncation`.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum WmStatus wm_green_table_build(const struct WmModel *model,
                                   size_t truncation,
                                   struct WmGreenTable **out);

// Releases a table; null is ignored.
//
// # Safety
// `table` must be null or a handle from [`wm_green_table_build`] not yet freed.
void wm_green_table_free(struct WmGreenTable *table);

// `Gamma` at `count` points `(theta[i], r[i])`: angle from the pole on `S^n`
// and fiber distance.
//
// # Safety
// `theta`, `r` and `out` must each point to `count` elements.
enum WmStatus wm_green_evaluate(const struct WmGreenTable *table,
                                const double *theta,
                                const double *r,
                                size_t count,
                                double *out);

// Constant term at the pole fitted on `count` radii in `[rho_min, rho_max]`.
//
// # Safety
// `table` must be a live handle; `mass` and `uncertainty` valid pointers.
enum WmStatus wm_mass_term(const struct WmGreenTable *table,
                           double rho_min,
                           double rho_max,
                           size_t count,
                           double *mass,
                           double *uncertainty);

// `Q*(S^m)`, the Yamabe constant of the round sphere.
//
// # Safety
// `out` must be a valid pointer.
enum WmStatus wm_q_star_sphere(size_t m, double *out);

#endif  /* WARPMASS_H */
