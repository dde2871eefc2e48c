#ifndef DNLS_H
#define DNLS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DnlsStatus {
  DNLS_STATUS_OK = 0,
  /**
   * Null pointer, bad size or malformed parameters.
   */
  DNLS_STATUS_INVALID_ARGUMENT = 1,
  /**
   * A model hypothesis fails: no spectral gap, ρ out of range, N < 3.
   */
  DNLS_STATUS_HYPOTHESIS = 2,
  /**
   * An algorithm did not converge.
   */
  DNLS_STATUS_NUMERICAL = 3,
  DNLS_STATUS_IO = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  DNLS_STATUS_PANIC = 5,
} DnlsStatus;

typedef struct DnlsGroundState DnlsGroundState;

typedef struct DnlsProblem DnlsProblem;

/**
 * Box, checkerboard potential `c(−1)^{Σx} + shift` and power nonlinearity.
 */
typedef struct DnlsProblemSpec {
  uint32_t dimension;
  uint32_t radius;
  double amplitude;
  /**
   * NaN selects the default `−2N`.
   */
  double shift;
  double p;
} DnlsProblemSpec;

typedef struct DnlsConstants {
  double kappa;
  double rho_plus;
  double rho_tilde_plus;
  double rho_max;
} DnlsConstants;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds the box operator and its spectral splitting.
 *
 * # Safety
 * `spec` must point to a valid `DnlsProblemSpec`; `out` must be writable.
 */
enum DnlsStatus dnls_problem_new(const struct DnlsProblemSpec *spec, struct DnlsProblem **out);

/**
 * # Safety
 * `problem` must come from `dnls_problem_new` and not be used afterwards.
 */
void dnls_problem_free(struct DnlsProblem *problem);

/**
 * Number of lattice sites, 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t dnls_problem_sites(const struct DnlsProblem *problem);

/**
 * Bloch gap edges of the potential on a `grid`-point k-mesh per axis.
 *
 * # Safety
 * `problem` must be a live handle; the output pointers must be writable.
 */
enum DnlsStatus dnls_problem_gap(const struct DnlsProblem *problem,
                                 uint32_t grid,
                                 double *sigma_minus,
                                 double *sigma_plus);

/**
 * Hardy constant, `ρ⁺` and `ρ_max` of the box (computed once, then cached).
 *
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
enum DnlsStatus dnls_problem_constants(struct DnlsProblem *problem, struct DnlsConstants *out);

/**
 * Ground state at `rho` with default solver settings and the given seed.
 *
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
enum DnlsStatus dnls_solve(struct DnlsProblem *problem,
                           double rho,
                           uint64_t seed,
                           struct DnlsGroundState **out);

/**
 * # Safety
 * `state` must come from `dnls_solve` and not be used afterwards.
 */
void dnls_ground_state_free(struct DnlsGroundState *state);

/**
 * `J_ρ(u)`, NaN for a null handle.
 *
 * # Safety
 * `state` must be null or a live handle.
 */
double dnls_ground_state_level(const struct DnlsGroundState *state);

/**
 * `‖J'_ρ(u)‖₂`, NaN for a null handle.
 *
 * # Safety
 * `state` must be null or a live handle.
 */
double dnls_ground_state_residual(const struct DnlsGroundState *state);

/**
 * Copies the field values (site enumeration order) into `buf`, which must
 * hold exactly `dnls_problem_sites` entries.
 *
 * # Safety
 * `state` must be a live handle and `buf` valid for `len` writes.
 */
enum DnlsStatus dnls_ground_state_copy_field(const struct DnlsGroundState *state,
                                             double *buf,
                                             size_t len);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library from the same thread.
 */
const char *dnls_last_error_message(void);

const char *dnls_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DNLS_H */
