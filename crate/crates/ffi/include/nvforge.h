#ifndef NVFORGE_H
#define NVFORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NvStatus {
  NV_STATUS_OK = 0,
  NV_STATUS_INVALID_ARGUMENT = 1,
  NV_STATUS_PRECONDITION = 2,
  NV_STATUS_OUT_OF_RANGE = 3,
  NV_STATUS_INFEASIBLE = 4,
  NV_STATUS_NUMERICAL = 5,
  NV_STATUS_NOT_CONVERGED = 6,
  NV_STATUS_PARSE = 7,
  NV_STATUS_IO = 8,
  NV_STATUS_NULL_POINTER = 9,
  NV_STATUS_PANIC = 10,
} NvStatus;

typedef enum NvSequence {
  NV_SEQUENCE_RAMSEY = 0,
  NV_SEQUENCE_HAHN = 1,
  /**
   * Uses the `n_pulses` argument.
   */
  NV_SEQUENCE_CPMG = 2,
  NV_SEQUENCE_XY4 = 3,
  NV_SEQUENCE_XY8 = 4,
} NvSequence;

typedef enum NvModel {
  /**
   * a·exp(−t/T₂*) + c
   */
  NV_MODEL_EXP = 0,
  /**
   * a·exp(−(t/T₂)^p) + c
   */
  NV_MODEL_STRETCHED = 1,
  /**
   * a·exp(−(t/T₁)^q) + c
   */
  NV_MODEL_T1 = 2,
  /**
   * Hyperfine-beat FID envelope
   */
  NV_MODEL_FID = 3,
} NvModel;

typedef enum NvSpecies {
  NV_SPECIES_ATOMIC = 0,
  NV_SPECIES_MOLECULAR = 1,
} NvSpecies;

/**
 * Sampled coherence curve.
 */
typedef struct NvCurve NvCurve;

/**
 * Fitted parameters with standard errors.
 */
typedef struct NvFit NvFit;

/**
 * Ornstein–Uhlenbeck bath parameters.
 */
typedef struct NvNoise NvNoise;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *nv_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nv_version(void);

/**
 * Secular transition frequencies `D ∓ γ|B∥|` in Hz.
 */
enum NvStatus nv_transition_frequencies(double zfs_hz,
                                        double gyromag_hz_per_t,
                                        double b_parallel_t,
                                        double *f_minus_hz,
                                        double *f_plus_hz);

/**
 * Exact transition frequencies of one NV axis (0..=3) in an arbitrary field.
 */
enum NvStatus nv_exact_frequencies(double bx_t,
                                   double by_t,
                                   double bz_t,
                                   uint32_t axis,
                                   double *f_low_hz,
                                   double *f_high_hz);

/**
 * OU bath with noise amplitude `b` (rad/s) and correlation time `tau_c` (s).
 */
enum NvStatus nv_noise_ou(double b_rad_s, double tau_c_s, struct NvNoise **noise);

/**
 * Named bath preset, e.g. "paper-like".
 */
enum NvStatus nv_noise_preset(const char *name, struct NvNoise **noise);

/**
 * Add a stretched T₁ channel `exp(−(t/T₁)^q)`.
 */
enum NvStatus nv_noise_set_t1(struct NvNoise *noise, double t1_s, double q);

void nv_noise_free(struct NvNoise *noise);

/**
 * Closed-form ensemble coherence at `n_times` total free-evolution times.
 */
enum NvStatus nv_simulate_analytic(enum NvSequence sequence,
                                   uint32_t n_pulses,
                                   const struct NvNoise *noise,
                                   const double *times_s,
                                   size_t n_times,
                                   struct NvCurve **curve);

/**
 * Monte-Carlo estimate; identical for a given seed at any thread count.
 */
enum NvStatus nv_simulate_mc(enum NvSequence sequence,
                             uint32_t n_pulses,
                             const struct NvNoise *noise,
                             const double *times_s,
                             size_t n_times,
                             size_t n_traj,
                             uint64_t seed,
                             struct NvCurve **curve);

/**
 * Curve from caller-owned arrays; the data are copied.
 */
enum NvStatus nv_curve_new(const double *times_s,
                           const double *signal,
                           size_t len,
                           struct NvCurve **curve);

enum NvStatus nv_curve_len(const struct NvCurve *curve, size_t *len);

/**
 * Copy up to `cap` samples of times and signal into caller buffers.
 */
enum NvStatus nv_curve_data(const struct NvCurve *curve,
                            double *times_s,
                            double *signal,
                            size_t cap);

void nv_curve_free(struct NvCurve *curve);

/**
 * Least-squares fit of `model`. A fit that runs out of iterations returns
 * `NotConverged` and still hands back its best parameters in `result`.
 */
enum NvStatus nv_fit(const struct NvCurve *curve,
                     enum NvModel model,
                     bool pin_offset,
                     struct NvFit **result);

/**
 * Value and standard error of a named parameter ("t2", "p", "t2_star", ...).
 */
enum NvStatus nv_fit_param(const struct NvFit *fit,
                           const char *name,
                           double *value,
                           double *stderr);

enum NvStatus nv_fit_residual_rms(const struct NvFit *fit, double *rms);

void nv_fit_free(struct NvFit *fit);

/**
 * Van der Pauw sheet resistance in ohm per square.
 */
enum NvStatus nv_van_der_pauw(double ra_ohm, double rb_ohm, double *rs_ohm_sq);

/**
 * Exposure time for a fluence, and the whole chopper pulses needed when
 * `chopper_pulse_s > 0` (otherwise `pulses` is set to 0).
 */
enum NvStatus nv_dose_to_time(double energy_ev,
                              double current_a,
                              double diameter_m,
                              double chopper_pulse_s,
                              enum NvSpecies species,
                              double dose_cm2,
                              double *duration_s,
                              uint64_t *pulses);

/**
 * DC and AC shot-noise sensitivities in T/√Hz.
 */
enum NvStatus nv_sensitivity(double concentration_ppm,
                             double detection_volume_m3,
                             double photon_rate_per_center_hz,
                             double contrast,
                             double t2_star_s,
                             double t2_dd_s,
                             double *eta_dc,
                             double *eta_ac);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NVFORGE_H */
