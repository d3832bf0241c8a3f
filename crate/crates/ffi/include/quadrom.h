#ifndef QUADROM_H
#define QUADROM_H

/* Generated by cbindgen from the quadrom-ffi sources; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum QrStatus {
  QR_STATUS_OK = 0,
  QR_STATUS_NULL_POINTER = 1,
  QR_STATUS_INVALID_ARGUMENT = 2,
  QR_STATUS_DIMENSION = 3,
  QR_STATUS_SINGULAR = 4,
  QR_STATUS_SIMULATION = 5,
  QR_STATUS_IO = 6,
  QR_STATUS_INTERNAL = 99,
} QrStatus;

/*
 Opaque result of a learning run.
 */
typedef struct QrFit QrFit;

/*
 Opaque quadratic system.
 */
typedef struct QrSystem QrSystem;

/*
 Options for `qr_fit_learn`; initialize with `qr_learn_options_default`.
 */
typedef struct QrLearnOptions {
  /*
   Relative singular-value threshold for order selection.
   */
  double threshold;
  /*
   Fixed reduced order; 0 selects the order from `threshold`.
   */
  size_t order;
  /*
   0 = interleaved, 1 = halves.
   */
  uint32_t partition;
  double tau;
  double epsilon;
  size_t max_iter;
  /*
   Nonzero stops after the second-harmonic estimate.
   */
  uint32_t one_step;
} QrLearnOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *qr_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *qr_version(void);

/*
 The two-state benchmark system.

 # Safety
 `out` must be a valid pointer to writable storage for a handle.
 */
enum QrStatus qr_system_toy(struct QrSystem **out);

/*
 Finite-difference Burgers system with `n` interior nodes.

 # Safety
 `out` must be a valid pointer to writable storage for a handle.
 */
enum QrStatus qr_system_burgers(size_t n,
                                double viscosity,
                                double boundary_gain,
                                struct QrSystem **out);

/*
 Real system from row-major arrays: `e`, `a` are `n x n`, `q` is `n x n²`,
 `b` and `c` have `n` entries. A null `e` means the identity.

 # Safety
 Non-null pointers must reference arrays of the stated lengths.
 */
enum QrStatus qr_system_new(size_t n,
                            const double *e,
                            const double *a,
                            const double *q,
                            const double *b,
                            const double *c,
                            struct QrSystem **out);

/*
 Reads a system JSON file.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum QrStatus qr_system_read_json(const char *path, struct QrSystem **out);

/*
 Writes a system JSON file.

 # Safety
 `sys` must be a live handle and `path` a NUL-terminated string.
 */
enum QrStatus qr_system_write_json(const struct QrSystem *sys, const char *path);

/*
 State dimension, or 0 for a null handle.

 # Safety
 `sys` must be null or a live handle.
 */
size_t qr_system_order(const struct QrSystem *sys);

/*
 Evaluates `H_m(s)` for `m` in 1..=3.

 # Safety
 `sys` must be a live handle; `out_re` and `out_im` must be writable.
 */
enum QrStatus qr_system_eval_h(const struct QrSystem *sys,
                               uint32_t m,
                               double s_re,
                               double s_im,
                               double *out_re,
                               double *out_im);

/*
 Copies the real parts of the quadratic operator, row-major `n x n²`, into
 `buf` of length `len`.

 # Safety
 `sys` must be a live handle and `buf` writable for `len` values.
 */
enum QrStatus qr_system_q(const struct QrSystem *sys, double *buf, size_t len);

/*
 Closed-form `H1, H2, H3` at `jω` for `n_points` frequencies. Each of
 `h1`, `h2`, `h3` receives `2 * n_points` interleaved values.

 # Safety
 `omegas` must hold `n_points` values and each output `2 * n_points`.
 */
enum QrStatus qr_sample_direct(const struct QrSystem *sys,
                               const double *omegas,
                               size_t n_points,
                               double *h1,
                               double *h2,
                               double *h3);

/*
 Adds seeded complex Gaussian noise at `snr_db` to one interleaved level in
 place.

 # Safety
 `values` must hold `2 * n_points` writable values.
 */
enum QrStatus qr_add_noise(double *values, size_t n_points, double snr_db, uint64_t seed);

/*
 Default learning options.
 */
struct QrLearnOptions qr_learn_options_default(void);

/*
 Learns a reduced quadratic model from interleaved `H1`, `H2`, `H3`
 samples at `jω`. A fit that did not converge is still returned; query it
 with `qr_fit_converged`.

 # Safety
 `omegas` must hold `n_points` values, each level `2 * n_points`;
 `opts` may be null for defaults; `out` must be writable.
 */
enum QrStatus qr_fit_learn(const double *omegas,
                           size_t n_points,
                           const double *h1,
                           const double *h2,
                           const double *h3,
                           const struct QrLearnOptions *opts,
                           struct QrFit **out);

/*
 Reduced order of the fit, or 0 for a null handle.

 # Safety
 `fit` must be null or a live handle.
 */
size_t qr_fit_order(const struct QrFit *fit);

/*
 Completed iteration steps (0 in one-step mode).

 # Safety
 `fit` must be null or a live handle.
 */
size_t qr_fit_iterations(const struct QrFit *fit);

/*
 1 when the iteration met its tolerance (always 1 in one-step mode).

 # Safety
 `fit` must be null or a live handle.
 */
int32_t qr_fit_converged(const struct QrFit *fit);

/*
 Last deviation of the iteration, NaN when unavailable.

 # Safety
 `fit` must be null or a live handle.
 */
double qr_fit_final_deviation(const struct QrFit *fit);

/*
 New system handle holding the learned model.

 # Safety
 `fit` must be a live handle and `out` writable.
 */
enum QrStatus qr_fit_model(const struct QrFit *fit, struct QrSystem **out);

/*
 Releases a system handle. Null is ignored.

 # Safety
 `sys` must be null or a handle not yet freed.
 */
void qr_system_free(struct QrSystem *sys);

/*
 Releases a fit handle. Null is ignored.

 # Safety
 `fit` must be null or a handle not yet freed.
 */
void qr_fit_free(struct QrFit *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QUADROM_H */
