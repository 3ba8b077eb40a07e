#ifndef CVMIX_H
#define CVMIX_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CvmixStatus {
  CVMIX_STATUS_OK = 0,
  CVMIX_STATUS_NULL_POINTER = 1,
  CVMIX_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Invalid JSON or unknown scenario.
   */
  CVMIX_STATUS_SCHEMA = 3,
  CVMIX_STATUS_SIMULATION = 4,
  CVMIX_STATUS_ZERO_PROBABILITY = 5,
  CVMIX_STATUS_PANIC = 6,
} CvmixStatus;

typedef enum CvmixPauli {
  CVMIX_PAULI_X = 0,
  CVMIX_PAULI_Z = 1,
  /**
   * Homodyne along q − p.
   */
  CVMIX_PAULI_Y_MINUS = 2,
  /**
   * Homodyne along q + p.
   */
  CVMIX_PAULI_Y_PLUS = 3,
} CvmixPauli;

/**
 * Opaque simulator state.
 */
typedef struct CvmixState CvmixState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *cvmix_last_error_message(void);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void cvmix_string_free(char *s);

/**
 * # Safety
 * `state` must come from this library or be null; it is invalid afterwards.
 */
void cvmix_state_free(struct CvmixState *state);

/**
 * # Safety
 * `out` must be writable.
 */
enum CvmixStatus cvmix_state_vacuum(uint32_t num_modes, double hbar, struct CvmixState **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum CvmixStatus cvmix_state_coherent(double re, double im, double hbar, struct CvmixState **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum CvmixStatus cvmix_state_squeezed(double r, double phi, double hbar, struct CvmixState **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum CvmixStatus cvmix_state_fock(uint32_t n, double r, double hbar, struct CvmixState **out);

/**
 * Cat state in the complex-weight representation; `parity` 0 is even.
 *
 * # Safety
 * `out` must be writable.
 */
enum CvmixStatus cvmix_state_cat(double re,
                                 double im,
                                 uint8_t parity,
                                 double hbar,
                                 struct CvmixState **out);

/**
 * Finite-energy GKP state cos(θ/2)|0⟩ + e^{−iφ} sin(θ/2)|1⟩.
 *
 * # Safety
 * `out` must be writable.
 */
enum CvmixStatus cvmix_state_gkp(double theta,
                                 double phi,
                                 double epsilon,
                                 double hbar,
                                 struct CvmixState **out);

/**
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum CvmixStatus cvmix_state_from_json(const char *json, struct CvmixState **out);

/**
 * # Safety
 * `state` must be a live handle; `out` must be writable.
 */
enum CvmixStatus cvmix_state_to_json(const struct CvmixState *state, char **out);

/**
 * # Safety
 * `state` must be a live handle; `out` must be writable.
 */
enum CvmixStatus cvmix_state_clone(const struct CvmixState *state, struct CvmixState **out);

/**
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum CvmixStatus cvmix_state_tensor(const struct CvmixState *a,
                                    const struct CvmixState *b,
                                    struct CvmixState **out);

/**
 * Reduced state of the listed modes.
 *
 * # Safety
 * `state` must be live, `modes` must hold `len` entries, `out` must be writable.
 */
enum CvmixStatus cvmix_state_partial_trace(const struct CvmixState *state,
                                           const uint32_t *modes,
                                           size_t len,
                                           struct CvmixState **out);

/**
 * # Safety
 * `state` must be live; `out` must be writable.
 */
enum CvmixStatus cvmix_state_num_modes(const struct CvmixState *state, uint32_t *out);

/**
 * # Safety
 * `state` must be live; `out` must be writable.
 */
enum CvmixStatus cvmix_state_num_peaks(const struct CvmixState *state, size_t *out);

/**
 * W at a phase-space point with 2N coordinates.
 *
 * # Safety
 * `point` must hold `len` values; `re` and `im` must be writable.
 */
enum CvmixStatus cvmix_wigner(const struct CvmixState *state,
                              const double *point,
                              size_t len,
                              double *re,
                              double *im);

/**
 * Real part of a single-mode Wigner function on a grid given in units of
 * √ħ. `out` receives `q_points * p_points` values, q-major.
 *
 * # Safety
 * `out` must hold `q_points * p_points` values; `reality` may be null.
 */
enum CvmixStatus cvmix_wigner_grid(const struct CvmixState *state,
                                   double q_min,
                                   double q_max,
                                   size_t q_points,
                                   double p_min,
                                   double p_max,
                                   size_t p_points,
                                   double *out,
                                   double *reality);

/**
 * # Safety
 * `state` must be live.
 */
enum CvmixStatus cvmix_apply_loss(struct CvmixState *state, uint32_t mode, double eta);

/**
 * # Safety
 * `state` must be live.
 */
enum CvmixStatus cvmix_apply_rotation(struct CvmixState *state, uint32_t mode, double theta);

/**
 * S(r) = diag(e^{−r}, e^{r}).
 *
 * # Safety
 * `state` must be live.
 */
enum CvmixStatus cvmix_apply_squeeze(struct CvmixState *state, uint32_t mode, double r);

/**
 * # Safety
 * `state` must be live.
 */
enum CvmixStatus cvmix_apply_displacement(struct CvmixState *state,
                                          uint32_t mode,
                                          double re,
                                          double im);

/**
 * # Safety
 * `state` must be live.
 */
enum CvmixStatus cvmix_apply_beamsplitter(struct CvmixState *state,
                                          uint32_t mode_a,
                                          uint32_t mode_b,
                                          double theta);

/**
 * Sample x_θ on `mode` with the given seed.
 *
 * # Safety
 * `state` must be live; `outcome` must be writable.
 */
enum CvmixStatus cvmix_homodyne_sample(const struct CvmixState *state,
                                       uint32_t mode,
                                       double angle,
                                       uint64_t seed,
                                       double *outcome);

/**
 * Condition on x_θ = `outcome`; `out` receives the state of the other
 * modes and `density` the outcome density.
 *
 * # Safety
 * `state` must be live; `density` may be null; `out` must be writable.
 */
enum CvmixStatus cvmix_homodyne_condition(const struct CvmixState *state,
                                          uint32_t mode,
                                          double angle,
                                          double outcome,
                                          double *density,
                                          struct CvmixState **out);

/**
 * Probability of logical 0 for a single-mode GKP-encoded state.
 *
 * # Safety
 * `state` must be live; `out` must be writable.
 */
enum CvmixStatus cvmix_pauli_readout(const struct CvmixState *state,
                                     enum CvmixPauli axis,
                                     double *out);

/**
 * tr(ρ_a ρ_b).
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum CvmixStatus cvmix_state_overlap(const struct CvmixState *a,
                                     const struct CvmixState *b,
                                     double *out);

/**
 * ⟨n|ρ|n⟩ for a single-mode state.
 *
 * # Safety
 * `state` must be live; `out` must be writable.
 */
enum CvmixStatus cvmix_fock_fidelity(const struct CvmixState *state, uint32_t n, double *out);

/**
 * Run a built-in scenario; `params_json` may be null for defaults. The
 * result JSON is written to `out`.
 *
 * # Safety
 * String arguments must be nul-terminated; `out` must be writable.
 */
enum CvmixStatus cvmix_run_scenario(const char *name,
                                    const char *params_json,
                                    uint64_t seed,
                                    double prune_tol,
                                    char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CVMIX_H */
