#ifndef LSCHEME_H
#define LSCHEME_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LsStatus {
  LS_STATUS_OK = 0,
  LS_STATUS_NULL_POINTER = 1,
  LS_STATUS_INVALID_ARGUMENT = 2,
  LS_STATUS_INVALID_CONFIG = 3,
  LS_STATUS_SOLVER_FAILURE = 4,
  LS_STATUS_IO_FAILURE = 5,
  LS_STATUS_FINISHED = 6,
  LS_STATUS_PANIC = 7,
} LsStatus;

/**
 * Cell field selectors for [`ls_simulator_get_field`], which takes them as `int32_t`.
 */
typedef enum LsField {
  LS_FIELD_SATURATION = 0,
  LS_FIELD_THETA = 1,
  LS_FIELD_PRESSURE = 2,
} LsField;

/**
 * A parsed run configuration.
 */
typedef struct LsConfig LsConfig;

/**
 * A simulation advanced one backward Euler step at a time.
 */
typedef struct LsSimulator LsSimulator;

/**
 * Time-step admissibility of the L-scheme.
 */
typedef struct LsTauReport {
  bool admissible;
  /**
   * Largest admissible step; infinite when unrestricted.
   */
  double tau_max;
  double c1;
  double c3;
} LsTauReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *ls_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ls_version(void);

/**
 * Parses a JSON run configuration. Unknown keys are rejected.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum LsStatus ls_config_from_json(const char *json, struct LsConfig **out);

/**
 * # Safety
 * `cfg` must be null or a handle from [`ls_config_from_json`] not yet freed.
 */
void ls_config_free(struct LsConfig *cfg);

/**
 * Evaluates the time-step restriction for the configured problem. A pilot
 * pressure solve estimates the flux bound when the configuration has none.
 *
 * # Safety
 * `cfg` must be a live config handle and `out` a writable pointer.
 */
enum LsStatus ls_check_tau(const struct LsConfig *cfg, struct LsTauReport *out);

/**
 * Builds a simulator at its initial state. The configuration may be freed afterwards.
 *
 * # Safety
 * `cfg` must be a live config handle and `out` a writable pointer.
 */
enum LsStatus ls_simulator_new(const struct LsConfig *cfg, struct LsSimulator **out);

/**
 * # Safety
 * `sim` must be null or a handle from [`ls_simulator_new`] not yet freed.
 */
void ls_simulator_free(struct LsSimulator *sim);

/**
 * Writes the number of cells, the number of time steps and the current step.
 * Any output pointer may be null.
 *
 * # Safety
 * `sim` must be a live simulator handle; non-null outputs must be writable.
 */
enum LsStatus ls_simulator_info(const struct LsSimulator *sim,
                                size_t *num_cells,
                                size_t *num_steps,
                                size_t *current_step);

/**
 * Advances one time step. Returns `LS_STATUS_FINISHED` once the final time
 * is reached. `iterations` (may be null) receives the L-scheme iteration count.
 *
 * # Safety
 * `sim` must be a live simulator handle; `iterations` null or writable.
 */
enum LsStatus ls_simulator_step(struct LsSimulator *sim, size_t *iterations);

/**
 * Copies a cell field of the current state into `buf`, which must hold
 * exactly `len` = number of cells values.
 *
 * # Safety
 * `sim` must be a live simulator handle and `buf` writable for `len` doubles.
 */
enum LsStatus ls_simulator_get_field(const struct LsSimulator *sim,
                                     int32_t field,
                                     double *buf,
                                     size_t len);

/**
 * Copies the complementary-pressure increments of the last step's L-scheme
 * iterations into `buf` (capacity `cap`) and writes their count to `written`.
 * Fails with `LS_STATUS_INVALID_ARGUMENT` if `cap` is too small; `written`
 * then holds the required size.
 *
 * # Safety
 * `sim` must be a live simulator handle, `buf` writable for `cap` doubles
 * (or null when `cap` is 0) and `written` writable.
 */
enum LsStatus ls_simulator_last_increments(const struct LsSimulator *sim,
                                           double *buf,
                                           size_t cap,
                                           size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LSCHEME_H */
