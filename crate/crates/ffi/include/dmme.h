#ifndef DMME_H
#define DMME_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DmmeStatus {
  DMME_STATUS_OK = 0,
  DMME_STATUS_NULL_POINTER = 1,
  DMME_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The requested controls do not exist (negative g6^2 somewhere).
   */
  DMME_STATUS_INADMISSIBLE = 3,
  /**
   * A valid request outside the supported model, e.g. Lamb shift at T > 0.
   */
  DMME_STATUS_UNSUPPORTED = 4,
  DMME_STATUS_NUMERICAL = 5,
  DMME_STATUS_BUFFER_TOO_SMALL = 6,
  DMME_STATUS_NO_SIGN_CHANGE = 7,
  DMME_STATUS_PANIC = 8,
} DmmeStatus;

typedef enum DmmeVariant {
  DMME_VARIANT_COS2 = 0,
  DMME_VARIANT_SIN3 = 1,
} DmmeVariant;

typedef enum DmmeOrientation {
  DMME_ORIENTATION_FORWARD = 0,
  DMME_ORIENTATION_REVERSED = 1,
} DmmeOrientation;

/**
 * Opaque protocol handle.
 */
typedef struct DmmeProtocol DmmeProtocol;

/**
 * Opaque trajectory handle (Schroedinger picture).
 */
typedef struct DmmeTrajectory DmmeTrajectory;

typedef struct DmmeProtocolParams {
  double gamma;
  double delta;
  double g2m;
  double omega_e;
  double g3;
  enum DmmeVariant variant;
  enum DmmeOrientation orientation;
} DmmeProtocolParams;

typedef struct DmmeBathParams {
  double temperature;
  double s32;
  double s24;
  double kappa;
  bool include_lamb_shift;
} DmmeBathParams;

typedef struct DmmeEvolveOptions {
  /**
   * Output points on [0, T], at least 2.
   */
  size_t points;
  bool closed_system;
  /**
   * Fidelity target: 1..=4 selects the instantaneous eigenstate, 0 disables.
   */
  uint32_t target_level;
} DmmeEvolveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *dmme_last_error(void);

/**
 * # Safety
 * `out` must be null or point to writable memory for one struct.
 */
enum DmmeStatus dmme_protocol_params_default(struct DmmeProtocolParams *out);

/**
 * # Safety
 * `out` must be null or point to writable memory for one struct.
 */
enum DmmeStatus dmme_bath_params_default(struct DmmeBathParams *out);

/**
 * Builds a protocol; `*out` receives a handle owned by the caller.
 *
 * # Safety
 * `params` must be null or valid; `out` must be null or writable.
 */
enum DmmeStatus dmme_protocol_new(const struct DmmeProtocolParams *params,
                                  struct DmmeProtocol **out);

/**
 * # Safety
 * `p` must be null or a handle from `dmme_protocol_new` not yet freed.
 */
void dmme_protocol_free(struct DmmeProtocol *p);

/**
 * # Safety
 * `p` must be a live handle; `out` writable.
 */
enum DmmeStatus dmme_protocol_duration(const struct DmmeProtocol *p, double *out);

/**
 * Control fields f(t) and J(t).
 *
 * # Safety
 * `p` must be a live handle; `f` and `j` writable.
 */
enum DmmeStatus dmme_protocol_fields(const struct DmmeProtocol *p, double t, double *f, double *j);

/**
 * Invariant coefficients g1..g6 at `t`, written to `out[0..6]`.
 *
 * # Safety
 * `p` must be a live handle; `out` must hold 6 doubles.
 */
enum DmmeStatus dmme_protocol_g(const struct DmmeProtocol *p, double t, double *out);

/**
 * Evolves the pure state with amplitudes `(re, im)` pairs in
 * `amplitudes[0..8]` (basis |00>, |01>, |10>, |11>; normalised here).
 *
 * # Safety
 * Pointers must be valid as described; `out` must be writable.
 */
enum DmmeStatus dmme_evolve(const struct DmmeProtocol *p,
                            const struct DmmeBathParams *bath,
                            const double *amplitudes,
                            const struct DmmeEvolveOptions *options,
                            struct DmmeTrajectory **out);

/**
 * # Safety
 * `t` must be null or a handle from `dmme_evolve` not yet freed.
 */
void dmme_trajectory_free(struct DmmeTrajectory *t);

/**
 * # Safety
 * `t` must be a live handle; `out` writable.
 */
enum DmmeStatus dmme_trajectory_len(const struct DmmeTrajectory *t, size_t *out);

/**
 * Output times; `out` must hold `len >= dmme_trajectory_len` doubles.
 *
 * # Safety
 * `t` must be a live handle; `out` must hold `len` doubles.
 */
enum DmmeStatus dmme_trajectory_times(const struct DmmeTrajectory *t, double *out, size_t len);

/**
 * Fidelity to the requested target at each output time.
 *
 * # Safety
 * `t` must be a live handle; `out` must hold `len` doubles.
 */
enum DmmeStatus dmme_trajectory_fidelity(const struct DmmeTrajectory *t, double *out, size_t len);

/**
 * Density matrix at output index `k` as 16 row-major `(re, im)` pairs.
 *
 * # Safety
 * `t` must be a live handle; `out` must hold 32 doubles.
 */
enum DmmeStatus dmme_trajectory_state(const struct DmmeTrajectory *t, size_t k, double *out);

/**
 * Exponential integral Ei(x) for finite nonzero x.
 *
 * # Safety
 * `out` must be writable.
 */
enum DmmeStatus dmme_exp_integral_ei(double x, double *out);

/**
 * Steady populations of psi2, psi3, psi4 for thermal occupations n32, n24.
 *
 * # Safety
 * `out` must hold 3 doubles.
 */
enum DmmeStatus dmme_steady_populations(double n32, double n24, double *out);

/**
 * Smallest g2m in [lo, hi] at which min_t alpha32 reaches zero, other
 * protocol parameters taken from `params`.
 *
 * # Safety
 * `params` must be valid; `out` writable.
 */
enum DmmeStatus dmme_threshold_g2m(const struct DmmeProtocolParams *params,
                                   double lo,
                                   double hi,
                                   size_t resolution,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DMME_H */
