/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef SPINCHAOS_H
#define SPINCHAOS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum SpinchaosStatus {
  SPINCHAOS_STATUS_OK = 0,
  SPINCHAOS_STATUS_NULL_POINTER = 1,
  SPINCHAOS_STATUS_INVALID_ARGUMENT = 2,
  SPINCHAOS_STATUS_OUT_OF_RANGE = 3,
  SPINCHAOS_STATUS_NUMERICAL = 4,
  SPINCHAOS_STATUS_IO = 5,
  SPINCHAOS_STATUS_PARSE = 6,
  SPINCHAOS_STATUS_BUFFER_TOO_SMALL = 7,
  SPINCHAOS_STATUS_PANIC = 8,
} SpinchaosStatus;

// A normalized spin-1 spinor `(ζ₁, ζ₀, ζ₋₁)` and its clock.
typedef struct SpinchaosState SpinchaosState;

// Static energies and drive: `q/h`, `ε_s/h`, `Ω/2π` in Hz, drive amplitude
// `ħD/ε_s`, modulation frequency in Hz, drive direction and step.
typedef struct SpinchaosSystem SpinchaosSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *spinchaos_version(void);

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to fit) and returns the full message length in bytes.
size_t spinchaos_last_error(char *buf, size_t len);

// Creates a system. `dir` points to three components of the drive
// direction (normalized here); `dt` is the integrator step in seconds.
enum SpinchaosStatus spinchaos_system_new(double q_hz,
                                          double eps_hz,
                                          double rabi_hz,
                                          double drive_amp,
                                          double drive_freq_hz,
                                          const double *dir,
                                          double dt,
                                          struct SpinchaosSystem **out);

// Creates a system with the default parameters and no drive.
enum SpinchaosStatus spinchaos_system_default(struct SpinchaosSystem **out);

void spinchaos_system_free(struct SpinchaosSystem *sys);

// `τ_s = h/ε_s` in seconds.
enum SpinchaosStatus spinchaos_system_tau_s(const struct SpinchaosSystem *sys, double *out);

// State from phase-space coordinates `(ρ₀, m, θ_s, θ_m)` (angles in radians).
enum SpinchaosStatus spinchaos_state_from_phase(double rho0,
                                                double m,
                                                double theta_s,
                                                double theta_m,
                                                struct SpinchaosState **out);

// State from a name (`xR`, `xC`, `polar`) or `"rho0,m,ts,tm"` with angles
// in units of π.
enum SpinchaosStatus spinchaos_state_from_name(const char *name, struct SpinchaosState **out);

// Haar-random state from `(seed, stream)`.
enum SpinchaosStatus spinchaos_state_haar(uint64_t seed,
                                          uint64_t stream,
                                          struct SpinchaosState **out);

void spinchaos_state_free(struct SpinchaosState *state);

// Writes `(ρ₀, m, θ_s, θ_m)` to `out[0..4]`.
enum SpinchaosStatus spinchaos_state_phase(const struct SpinchaosState *state, double *out);

// Writes interleaved real and imaginary parts of `(ζ₁, ζ₀, ζ₋₁)` to
// `out[0..6]`.
enum SpinchaosStatus spinchaos_state_amplitudes(const struct SpinchaosState *state, double *out);

// Time of the state in seconds.
enum SpinchaosStatus spinchaos_state_time(const struct SpinchaosState *state, double *out);

// Static energy `E/ε_s`.
enum SpinchaosStatus spinchaos_energy(const struct SpinchaosSystem *sys,
                                      const struct SpinchaosState *state,
                                      double *out);

// Advances `state` in place by `n_steps` integrator steps.
enum SpinchaosStatus spinchaos_evolve(const struct SpinchaosSystem *sys,
                                      struct SpinchaosState *state,
                                      uint64_t n_steps);

// Largest Lyapunov exponent in units of `1/τ_s`, with its standard error.
enum SpinchaosStatus spinchaos_lle(const struct SpinchaosSystem *sys,
                                   const struct SpinchaosState *state,
                                   double d0,
                                   double reset_interval,
                                   size_t iterations,
                                   uint64_t seed,
                                   double *lambda,
                                   double *stderr);

// Ensemble randomization around `center`. Writes the finite-size floor,
// `R` and `τ_r/τ_s` (`INFINITY` when the floor is never reached).
enum SpinchaosStatus spinchaos_randomize(const struct SpinchaosSystem *sys,
                                         const struct SpinchaosState *center,
                                         size_t n_ens,
                                         double d_i,
                                         double t_final_tau,
                                         uint64_t seed,
                                         double *floor,
                                         double *r,
                                         double *tau_r_over_tau_s);

// Drive amplitudes `ħD/ε_s` of the first `count` predicted dips for the
// system's modulation frequency. `out` must hold `count` values.
enum SpinchaosStatus spinchaos_predict_dips(const struct SpinchaosSystem *sys,
                                            size_t count,
                                            double *out);

// `J_n(x)` for `n ≤ 100`, `0 ≤ x ≤ 50`.
enum SpinchaosStatus spinchaos_bessel_j(uint32_t n, double x, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPINCHAOS_H */
