#ifndef SQDRIVE_H
#define SQDRIVE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Call outcome. Values 2-4 match the CLI exit codes.
 */
typedef enum {
  SQD_STATUS_OK = 0,
  SQD_STATUS_NULL_POINTER = 1,
  SQD_STATUS_VALIDATION = 2,
  SQD_STATUS_CONVERGENCE = 3,
  SQD_STATUS_IO = 4,
  SQD_STATUS_PANIC = 5,
} SqdStatus;

typedef enum {
  SQD_MODE_GHZ3132 = 0,
  SQD_MODE_GHZ2732 = 1,
} SqdMode;

typedef enum {
  SQD_TRANSITION_PLUS = 0,
  SQD_TRANSITION_MINUS = 1,
} SqdTransition;

/**
 * Circuit parameters.
 */
typedef struct SqdCircuit SqdCircuit;

/**
 * Ensemble `rho_00`, pulse duration by drive frequency.
 */
typedef struct SqdSpectrogram SqdSpectrogram;

/**
 * Complex drive fields at one frequency, MHz.
 */
typedef struct {
  double magnetic_re;
  double magnetic_im;
  double acoustic_re;
  double acoustic_im;
} SqdFields;

typedef struct {
  double alpha;
  double beta;
  double phi_rad;
  double wavelength_um;
  uint32_t n_nv;
  SqdTransition transition;
  double t2_us;
} SqdSimParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, static NUL-terminated string.
 */
const char *sqd_version(void);

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next call.
 */
const char *sqd_last_error(void);

/**
 * `params`: A (MHz/S), B (kHz/V), Rm (ohm), Lm (uH), Cm (fF), R0 (ohm),
 * C0 (pF), Rs (ohm).
 */
SqdStatus sqd_circuit_new(const double *params, SqdCircuit **out);

SqdStatus sqd_circuit_preset(SqdMode mode, SqdCircuit **out);

void sqd_circuit_free(SqdCircuit *c);

/**
 * Copy the eight parameters into `out`.
 */
SqdStatus sqd_circuit_params(const SqdCircuit *c, double *out);

/**
 * Closed-form resonance (GHz) and quality factor. Either output may be NULL.
 */
SqdStatus sqd_circuit_resonance(const SqdCircuit *c, double *f_r_ghz, double *q);

SqdStatus sqd_circuit_fields(const SqdCircuit *c, double f_ghz, SqdFields *out);

/**
 * Fit both spectra sampled on the shared grid `freq_ghz[n]`. Phase arrays
 * may be NULL. `relative_residual` may be NULL.
 */
SqdStatus sqd_circuit_fit(const double *freq_ghz,
                          const double *magnetic_mhz,
                          const double *magnetic_phase,
                          const double *acoustic_mhz,
                          const double *acoustic_phase,
                          size_t n,
                          SqdCircuit **out,
                          double *relative_residual);

/**
 * On-resonance ensemble spectrogram over `freq_ghz[n_freq]` x `tau_us[n_tau]`.
 */
SqdStatus sqd_simulate(const SqdCircuit *c,
                       const SqdSimParams *p,
                       const double *freq_ghz,
                       size_t n_freq,
                       const double *tau_us,
                       size_t n_tau,
                       SqdSpectrogram **out);

SqdStatus sqd_spectrogram_shape(const SqdSpectrogram *s, size_t *n_tau, size_t *n_freq);

/**
 * Copy the signal row-major (tau rows, frequency columns) into `buf[len]`;
 * `len` must equal `n_tau * n_freq`.
 */
SqdStatus sqd_spectrogram_copy(const SqdSpectrogram *s, double *buf, size_t len);

void sqd_spectrogram_free(SqdSpectrogram *s);

/**
 * SSIM of two row-major `rows x cols` images after min-max rescaling.
 * `gaussian` selects the 11x11, sigma 1.5 window; otherwise one global
 * window.
 */
SqdStatus sqd_ssim(const double *x,
                   const double *y,
                   size_t rows,
                   size_t cols,
                   bool gaussian,
                   double *out);

/**
 * Stress susceptibilities `{a1, a2, b, c, b', c'}` (MHz/GPa) to strain
 * susceptibilities `{lambda_a1, ..., lambda_c'}` (GHz/strain) with the
 * default stiffness constants. NaN marks an absent coefficient in either
 * direction; pairs must be both present or both absent.
 */
SqdStatus sqd_strain_susceptibility(const double *stress_mhz_gpa, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SQDRIVE_H */
