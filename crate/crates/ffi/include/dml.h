#ifndef DML_H
#define DML_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum DmlStatus {
  DML_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  DML_STATUS_NULL_POINTER = 1,
  /**
   * An argument or input file was rejected.
   */
  DML_STATUS_VALIDATION = 2,
  /**
   * The computation failed (solver step underflow, non-finite values).
   */
  DML_STATUS_NUMERIC = 3,
  /**
   * A file could not be read.
   */
  DML_STATUS_IO = 4,
  /**
   * A file was read but is malformed.
   */
  DML_STATUS_FORMAT = 5,
  /**
   * The library panicked; this is a bug.
   */
  DML_STATUS_PANIC = 6,
} DmlStatus;

/**
 * Laser parameter set.
 */
typedef struct DmlLaser DmlLaser;

/**
 * Trained surrogate model, evaluated in single precision.
 */
typedef struct DmlModel DmlModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version string of the library, static and NUL-terminated.
 */
const char *dml_version(void);

/**
 * Allocate the built-in default laser parameters.
 *
 * # Safety
 * `out` must be NULL or point to writable storage for one pointer.
 */
enum DmlStatus dml_laser_default(struct DmlLaser **out);

/**
 * Load laser parameters from a `key = value` file.
 *
 * # Safety
 * `path` must be NULL or a NUL-terminated string; `out` must be NULL or
 * point to writable storage for one pointer.
 */
enum DmlStatus dml_laser_load(const char *path, struct DmlLaser **out);

/**
 * Release a laser handle. NULL is ignored.
 *
 * # Safety
 * `laser` must be NULL or a handle from this library not yet freed.
 */
void dml_laser_free(struct DmlLaser *laser);

/**
 * Threshold current in amperes.
 *
 * # Safety
 * `laser` must be NULL or a live handle; `out` must be NULL or writable.
 */
enum DmlStatus dml_laser_threshold_current(const struct DmlLaser *laser, double *out);

/**
 * Small-signal relaxation-oscillation frequency in hertz at bias `current`
 * amperes.
 *
 * # Safety
 * `laser` must be NULL or a live handle; `out` must be NULL or writable.
 */
enum DmlStatus dml_laser_relaxation_frequency(const struct DmlLaser *laser,
                                              double current,
                                              double *out);

/**
 * Solve the rate equations for a normalised drive waveform.
 *
 * `input` holds `len` samples in [0, 1], mapped onto the default operating
 * point (bias 3·I_th, 2·I_th peak-to-peak) at `samples_per_symbol` samples
 * per symbol and symbol rate `fraction`·f_R. The min-max normalised optical
 * power is written to `out`, which must hold `len` values.
 *
 * # Safety
 * `laser` must be NULL or a live handle; `input` and `out` must be NULL or
 * valid for `len` doubles and must not overlap.
 */
enum DmlStatus dml_simulate(const struct DmlLaser *laser,
                            const double *input,
                            size_t len,
                            double fraction,
                            size_t samples_per_symbol,
                            double *out);

/**
 * Load a trained model from a checkpoint file.
 *
 * # Safety
 * `path` must be NULL or a NUL-terminated string; `out` must be NULL or
 * point to writable storage for one pointer.
 */
enum DmlStatus dml_model_load(const char *path, struct DmlModel **out);

/**
 * Release a model handle. NULL is ignored.
 *
 * # Safety
 * `model` must be NULL or a handle from this library not yet freed.
 */
void dml_model_free(struct DmlModel *model);

/**
 * Architecture name of the model (`"volterra"`, `"tdnn"`, `"lstm"` or
 * `"cat"`), static and NUL-terminated. NULL for a NULL handle.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
const char *dml_model_kind(const struct DmlModel *model);

/**
 * Predict the normalised optical power for one waveform of `len` samples.
 *
 * # Safety
 * `model` must be NULL or a live handle; `input` and `out` must be NULL or
 * valid for `len` floats and must not overlap.
 */
enum DmlStatus dml_model_predict(const struct DmlModel *model,
                                 const float *input,
                                 size_t len,
                                 float *out);

/**
 * Message of the last failed call on this thread, or NULL if none.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *dml_last_error_message(void);

/**
 * Static name of a status code, e.g. `"validation"`.
 */
const char *dml_status_name(enum DmlStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DML_H */
