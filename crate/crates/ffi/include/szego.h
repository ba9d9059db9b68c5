#ifndef SZEGO_H
#define SZEGO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Kernel evaluation method.
 */
typedef enum {
  SZEGO_METHOD_AUTO = 0,
  SZEGO_METHOD_CLOSED = 1,
  SZEGO_METHOD_NUMERIC = 2,
} SzegoMethod;

/**
 * Result codes of every fallible call.
 */
typedef enum {
  SZEGO_STATUS_OK = 0,
  SZEGO_STATUS_NULL_POINTER = 1,
  SZEGO_STATUS_INVALID_MODEL = 2,
  SZEGO_STATUS_INVALID_ARGUMENT = 3,
  SZEGO_STATUS_DIVERGENT = 4,
  SZEGO_STATUS_ON_DIAGONAL = 5,
  SZEGO_STATUS_NEAR_DIAGONAL = 6,
  SZEGO_STATUS_TOLERANCE_NOT_MET = 7,
  SZEGO_STATUS_BOX_TOO_SMALL = 8,
  SZEGO_STATUS_UNSUPPORTED = 9,
  SZEGO_STATUS_PANIC = 10,
} SzegoStatus;

/**
 * Opaque model handle.
 */
typedef struct SzegoModel SzegoModel;

/**
 * Grid geometry; samples are interleaved `(re, im)` doubles, row-major over
 * `(i_x, i_y, i_t1, ..., i_tn)` with `x` slowest.
 */
typedef struct {
  size_t n;
  size_t n_x;
  size_t n_y;
  size_t n_t;
  double x_max;
  double l_y;
  double l_t;
} SzegoGridSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a model with profile `p_coeffs` (ascending) and direction `a`
 * (length `n`). On success `*out` receives a new handle.
 *
 * # Safety
 * Pointers must be valid for the given lengths; `out` must be writable.
 */
SzegoStatus szego_model_new(const double *p_coeffs,
                            size_t p_len,
                            const double *a,
                            size_t n,
                            SzegoModel **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `model` must be null or a live handle from [`szego_model_new`].
 */
void szego_model_free(SzegoModel *model);

/**
 * Codimension `n` of the model, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t szego_model_codimension(const SzegoModel *model);

/**
 * `log C_{η,τ}` with `tau` of length `n`.
 *
 * # Safety
 * `tau` must hold `tau_len` doubles; output pointers must be writable
 * (`out_est_error` may be null).
 */
SzegoStatus szego_log_weight(const SzegoModel *model,
                             double eta,
                             const double *tau,
                             size_t tau_len,
                             double rel_tol,
                             double *out_log_c,
                             double *out_est_error);

/**
 * Kernel as `amplitude · δ₀[leaf_offset]` between points given as
 * `(x, y, t_1, ..., t_n)` arrays of length `n + 2`. `out_offset` receives
 * `n − 1` values and may be null when `n = 1`.
 *
 * # Safety
 * `alpha` and `beta` must hold `point_len` doubles; output pointers must be
 * writable for their documented lengths.
 */
SzegoStatus szego_kernel(const SzegoModel *model,
                         const double *alpha,
                         const double *beta,
                         size_t point_len,
                         double rel_tol,
                         SzegoMethod method,
                         double *out_amplitude_re,
                         double *out_amplitude_im,
                         double *out_offset,
                         bool *out_on_leaf);

/**
 * Number of complex samples a grid holds, or 0 for an invalid spec.
 */
size_t szego_grid_len(SzegoGridSpec spec);

/**
 * Applies the Szegő projection. `input` and `output` hold
 * `2 * szego_grid_len(spec)` doubles and may alias.
 *
 * # Safety
 * Buffers must be valid for the stated length.
 */
SzegoStatus szego_project(const SzegoModel *model,
                          SzegoGridSpec spec,
                          const double *input,
                          double *output);

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *szego_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *szego_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SZEGO_H */
