#ifndef PARASEMI_H
#define PARASEMI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Time profile of a modal forcing or gain.
 */
typedef enum PsProfile {
  PS_PROFILE_ZERO = 0,
  PS_PROFILE_CONSTANT = 1,
  /**
   * `t^{β-1}`
   */
  PS_PROFILE_POWER = 2,
  /**
   * `t^{β-1+σ}`
   */
  PS_PROFILE_HOLDER = 3,
  /**
   * `t^{β-1} + t^{β-1+σ}`
   */
  PS_PROFILE_POWER_PLUS_HOLDER = 4,
} PsProfile;

typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  PS_STATUS_INVALID_INPUT = 2,
  PS_STATUS_SHAPE = 3,
  PS_STATUS_SINGULARITY = 4,
  PS_STATUS_REGIME = 5,
  PS_STATUS_PRECONDITION = 6,
  PS_STATUS_TOLERANCE = 7,
  PS_STATUS_INTERNAL = 8,
} PsStatus;

/**
 * Opaque diagonal operator handle.
 */
typedef struct PsOperator PsOperator;

typedef struct PsIsometry {
  double mc_mean_square;
  double analytic;
  double standard_error;
  double z_score;
} PsIsometry;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message (NUL-terminated, truncated
 * to `len`) into `buf` and returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
uintptr_t ps_last_error_message(char *buf, uintptr_t len);

/**
 * Creates an operator with eigenvalues `eig[0..n]` and space weights
 * `weights[0..n]`; a null `weights` selects unit weights.
 *
 * # Safety
 * `eig` (and `weights` when non-null) must point to `n` readable doubles;
 * `out` must be a valid pointer.
 */
enum PsStatus ps_operator_new(const double *eig,
                              const double *weights,
                              uintptr_t n,
                              struct PsOperator **out);

/**
 * `-Δ + a` on the `d`-torus in `H^{-1}`, modes `|k|_∞ ≤ k_max` sorted by
 * eigenvalue.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PsStatus ps_heat_operator_new(uint32_t d, uint32_t k_max, double a, struct PsOperator **out);

/**
 * Yosida approximation `A (1 + A/n)^{-1}` of `op`.
 *
 * # Safety
 * `op` must be a live handle and `out` a valid pointer.
 */
enum PsStatus ps_yosida_new(const struct PsOperator *op, uint32_t n, struct PsOperator **out);

/**
 * # Safety
 * `op` must be null or a handle not yet freed.
 */
void ps_operator_free(struct PsOperator *op);

/**
 * Number of modes, or 0 for a null handle.
 *
 * # Safety
 * `op` must be null or a live handle.
 */
uintptr_t ps_operator_dim(const struct PsOperator *op);

/**
 * Copies the eigenvalues into `out[0..n]`.
 *
 * # Safety
 * `op` must be a live handle; `out` must point to `n` writable doubles.
 */
enum PsStatus ps_operator_eigenvalues(const struct PsOperator *op, double *out, uintptr_t n);

/**
 * `out = A^θ S(t) v`.
 *
 * # Safety
 * `op` must be a live handle; `v` and `out` must each hold `n` doubles.
 */
enum PsStatus ps_semigroup_apply(const struct PsOperator *op,
                                 double t,
                                 double theta,
                                 const double *v,
                                 double *out,
                                 uintptr_t n);

/**
 * `out = A^θ v`.
 *
 * # Safety
 * `op` must be a live handle; `v` and `out` must each hold `n` doubles.
 */
enum PsStatus ps_frac_power_apply(const struct PsOperator *op,
                                  double theta,
                                  const double *v,
                                  double *out,
                                  uintptr_t n);

/**
 * Observed `t^θ ‖A^θ S(t)‖` on `grid[0..m]` (written to `observed` when
 * non-null) and the certified bound `(θ/e)^θ`. `violation` is set to 1 if
 * any observation exceeds the bound.
 *
 * # Safety
 * `op` must be a live handle; `grid` must hold `m` doubles, `observed` must
 * be null or hold `m` doubles; `certified` and `violation` must be valid.
 */
enum PsStatus ps_semigroup_bound(const struct PsOperator *op,
                                 double theta,
                                 const double *grid,
                                 uintptr_t m,
                                 double *observed,
                                 double *certified,
                                 int32_t *violation);

/**
 * `∫_s^t (t-u)^{a-1} (u-s)^{b-1} du` for `a, b ∈ (0, 1)`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PsStatus ps_beta_kernel(double a, double b, double s, double t, double *out);

/**
 * Mild solution of `dX + AX dt = F dt`, `X(0) = xi`, with modal forcing
 * `A^{-α₁}F(t) = profile(t) · forcing`, on the grid `nodes[0..m]`
 * (starting at 0). Writes `X` node-major into `out[0..m·n]`.
 *
 * # Safety
 * `op` must be a live handle; `xi` and `forcing` must hold `n` doubles,
 * `nodes` `m` doubles and `out` `m·n` doubles.
 */
enum PsStatus ps_mild_solve(const struct PsOperator *op,
                            double alpha1,
                            const double *xi,
                            const double *forcing,
                            enum PsProfile profile,
                            double beta,
                            double sigma,
                            const double *nodes,
                            uintptr_t m,
                            double *out,
                            uintptr_t n);

/**
 * Monte-Carlo Itô isometry check at `t = horizon` for constant gains
 * `gains[0..n]` on a uniform grid with `steps` intervals.
 *
 * # Safety
 * `op` must be a live handle; `gains` must hold `n` doubles and `out` must
 * be a valid pointer.
 */
enum PsStatus ps_isometry_check(const struct PsOperator *op,
                                const double *gains,
                                uintptr_t n,
                                double horizon,
                                uintptr_t steps,
                                uint64_t seed,
                                uintptr_t n_paths,
                                struct PsIsometry *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARASEMI_H */
