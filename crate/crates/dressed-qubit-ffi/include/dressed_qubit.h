#ifndef DRESSED_QUBIT_H
#define DRESSED_QUBIT_H

/* Generated by cbindgen from the dressed-qubit-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Scalar fields of a system handle (frequencies in rad/μs).
typedef enum DqParam {
  DQ_PARAM_OMEGA0 = 0,
  DQ_PARAM_OMEGA_B = 1,
  DQ_PARAM_RABI = 2,
  DQ_PARAM_DELTA1 = 3,
  DQ_PARAM_DELTA2 = 4,
} DqParam;

// Result codes of every fallible call.
typedef enum DqStatus {
  DQ_STATUS_OK = 0,
  DQ_STATUS_NULL_POINTER = 1,
  DQ_STATUS_INVALID_PARAMETER = 2,
  DQ_STATUS_RESONANCE = 3,
  DQ_STATUS_AMBIGUOUS_SPECTRUM = 4,
  DQ_STATUS_NO_ROBUST_POINT = 5,
  DQ_STATUS_NUMERICAL = 6,
  DQ_STATUS_BUFFER_TOO_SMALL = 7,
  DQ_STATUS_PANIC = 8,
} DqStatus;

// How a coherence time was obtained.
typedef enum DqT2Kind {
  // No estimate available.
  DQ_T2_KIND_NONE = 0,
  // Threshold crossing.
  DQ_T2_KIND_CROSSING = 1,
  // No crossing within the horizon; the value is a lower bound.
  DQ_T2_KIND_LOWER_BOUND = 2,
} DqT2Kind;

// Model tier.
typedef enum DqTier {
  DQ_TIER_LAB = 0,
  DQ_TIER_INTERACTION_PICTURE = 1,
  DQ_TIER_DRESSED = 2,
} DqTier;

// Opaque simulated curve.
typedef struct DqCurve DqCurve;

// Opaque system configuration.
typedef struct DqSystem DqSystem;

// Dressed-level shifts and gaps (rad/μs).
typedef struct DqStarkShifts {
  double de_b;
  double de_d;
  double de_0;
  double e_bd;
  double e_0b;
} DqStarkShifts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *dq_version(void);

// Static description of a status code.
const char *dq_status_string(enum DqStatus status);

// Message of the last failed call on this thread (empty after success).
const char *dq_last_error(void);

// New system handle at the reference operating point (dressed tier).
struct DqSystem *dq_system_new(void);

// Releases a system handle.
//
// # Safety
// `sys` must be `NULL` or a handle from [`dq_system_new`] not yet freed.
void dq_system_free(struct DqSystem *sys);

// Sets a scalar field. Validation happens when the system is used.
//
// # Safety
// `sys` must be a live handle.
enum DqStatus dq_system_set(struct DqSystem *sys, enum DqParam param, double value);

// Reads a scalar field.
//
// # Safety
// `sys` must be a live handle and `out` a writable `double`.
enum DqStatus dq_system_get(const struct DqSystem *sys, enum DqParam param, double *out);

// Selects the model tier.
//
// # Safety
// `sys` must be a live handle.
enum DqStatus dq_system_set_tier(struct DqSystem *sys, enum DqTier tier);

// Second-order dressed-level shifts.
//
// # Safety
// `sys` must be a live handle and `out` writable.
enum DqStatus dq_stark_second_order(const struct DqSystem *sys, struct DqStarkShifts *out);

// Numerically exact gaps (Floquet analysis); `de_*` hold the second-order
// shifts.
//
// # Safety
// `sys` must be a live handle and `out` writable.
enum DqStatus dq_stark_numeric(const struct DqSystem *sys, struct DqStarkShifts *out);

// Drive-robust blue detuning `Δ2` for the other parameters of `sys`, with
// the numeric gap model when `numeric` is non-zero (slow) or the
// second-order model otherwise.
//
// # Safety
// `sys` must be a live handle and `delta2` writable.
enum DqStatus dq_robust_point(const struct DqSystem *sys, int32_t numeric, double *delta2);

// Closed-form coherence time of the driven two-level system.
//
// # Safety
// `t2` and `kind` must be writable.
enum DqStatus dq_analytic_tls_t2(double t2_star,
                                 double tau,
                                 double rabi,
                                 double *t2,
                                 enum DqT2Kind *kind);

// Monte Carlo dephasing of the driven two-level system; on success
// `*curve` receives a new handle.
//
// # Safety
// `curve` must be writable.
enum DqStatus dq_tls_dephasing(double t2_star,
                               double tau,
                               double rabi,
                               uintptr_t n_trajectories,
                               uint64_t seed,
                               struct DqCurve **curve);

// Full dressed-qubit simulation at the tier of `sys` under magnetic noise
// `(t2_star, tau)` and relative drive-amplitude noise
// `(delta_omega, tau_omega)`, with `delta_omega` read as the stationary
// standard deviation; on success `*curve` receives a new handle.
//
// # Safety
// `sys` must be a live handle and `curve` writable.
enum DqStatus dq_nv_full(const struct DqSystem *sys,
                         double t2_star,
                         double tau,
                         double delta_omega,
                         double tau_omega,
                         uintptr_t n_trajectories,
                         uint64_t seed,
                         double t_final,
                         struct DqCurve **curve);

// Number of samples in a curve (0 for `NULL`).
//
// # Safety
// `curve` must be `NULL` or a live handle.
uintptr_t dq_curve_len(const struct DqCurve *curve);

// Copies times, mean probabilities and standard errors into caller
// buffers of `capacity` elements; any buffer may be `NULL` to skip it.
//
// # Safety
// `curve` must be a live handle; non-null buffers must hold `capacity`
// doubles.
enum DqStatus dq_curve_copy(const struct DqCurve *curve,
                            double *t_us,
                            double *p_mean,
                            double *p_sem,
                            uintptr_t capacity);

// Coherence time extracted from a curve.
//
// # Safety
// `curve` must be a live handle; `t2` and `kind` writable.
enum DqStatus dq_curve_t2(const struct DqCurve *curve, double *t2, enum DqT2Kind *kind);

// Releases a curve handle.
//
// # Safety
// `curve` must be `NULL` or a handle not yet freed.
void dq_curve_free(struct DqCurve *curve);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DRESSED_QUBIT_H */
