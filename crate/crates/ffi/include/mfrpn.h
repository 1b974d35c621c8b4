#ifndef MFRPN_H
#define MFRPN_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>

// Result of every fallible call. The nonzero library codes match the
// command-line exit codes.
typedef enum MfrpnStatus {
  MFRPN_STATUS_OK = 0,
  MFRPN_STATUS_CONFIG = 2,
  MFRPN_STATUS_DATA = 3,
  MFRPN_STATUS_NUMERIC = 4,
  MFRPN_STATUS_IO = 5,
  MFRPN_STATUS_NULL_POINTER = 10,
  MFRPN_STATUS_INVALID_ARGUMENT = 11,
  MFRPN_STATUS_BUFFER_TOO_SMALL = 12,
  MFRPN_STATUS_PANIC = 13,
} MfrpnStatus;

// A loaded checkpoint. Opaque to C.
typedef struct MfrpnModel MfrpnModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// The message for the last failed call on this thread, or null after a
// successful call. Valid until the next call into the library on this thread.
const char *mfrpn_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *mfrpn_version(void);

// Opens a checkpoint directory written by `mfrpn train`. With
// `extract_lf` set, an mf-rpn checkpoint is opened as its low-fidelity
// heads. On success `*out` receives a handle for [`mfrpn_model_free`].
//
// # Safety
// `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
enum MfrpnStatus mfrpn_model_open(const char *path, bool extract_lf, struct MfrpnModel **out);

// Releases a handle from [`mfrpn_model_open`]. Null is ignored.
//
// # Safety
// `model` must be null or a live handle not yet freed.
void mfrpn_model_free(struct MfrpnModel *model);

// Number of raw input features, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t mfrpn_model_input_dim(const struct MfrpnModel *model);

// Number of output variables, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t mfrpn_model_output_dim(const struct MfrpnModel *model);

// Number of ensemble members, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t mfrpn_model_member_count(const struct MfrpnModel *model);

// Predicts `n_samples` raw input rows (row-major, `n_inputs` columns).
// Writes the ensemble mean and spread, each `n_samples * output_dim`
// row-major values in physical units, into caller buffers of `out_len`
// entries. `sigma` may be null when the spread is not wanted.
//
// # Safety
// `inputs` must hold `n_samples * n_inputs` values; `mean` (and `sigma`
// when non-null) must have room for `out_len` values.
enum MfrpnStatus mfrpn_model_predict(const struct MfrpnModel *model,
                                     const double *inputs,
                                     size_t n_samples,
                                     size_t n_inputs,
                                     double *mean,
                                     double *sigma,
                                     size_t out_len);

// Fair ensemble CRPS of `n` samples against observation `y`.
//
// # Safety
// `samples` must hold `n` values; `out` must be writable.
enum MfrpnStatus mfrpn_crps_fair(const double *samples, size_t n, double y, double *out);

// `scale` times the mean absolute error over `n` pairs.
//
// # Safety
// `preds` and `targets` must hold `n` values; `out` must be writable.
enum MfrpnStatus mfrpn_mae(const double *preds,
                           const double *targets,
                           size_t n,
                           double scale,
                           double *out);

// Coefficient of determination over `n` pairs. Fails with
// [`MfrpnStatus::Numeric`] when the targets have zero variance.
//
// # Safety
// `preds` and `targets` must hold `n` values; `out` must be writable.
enum MfrpnStatus mfrpn_r2(const double *preds, const double *targets, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MFRPN_H */
