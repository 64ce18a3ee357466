#ifndef MBTHP_H
#define MBTHP_H

/* Generated by cbindgen from mbthp-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum MbthpStatus {
  MBTHP_STATUS_OK = 0,
  MBTHP_STATUS_NULL_ARGUMENT = 1,
  MBTHP_STATUS_INVALID_UTF8 = 2,
  MBTHP_STATUS_CONFIG_ERROR = 3,
  MBTHP_STATUS_RUN_ERROR = 4,
  MBTHP_STATUS_IO_ERROR = 5,
  MBTHP_STATUS_UNSUPPORTED_ALGORITHM = 6,
  MBTHP_STATUS_INDEX_OUT_OF_RANGE = 7,
  MBTHP_STATUS_NOT_RUN = 8,
} MbthpStatus;

/**
 * Opaque experiment handle.
 */
typedef struct MbthpExperiment MbthpExperiment;

/**
 * One Eb/N0 point of a finished run, plain-old-data for C callers.
 */
typedef struct MbthpRow {
  double ebno_db;
  uint64_t trials;
  uint64_t bits_sent;
  uint64_t bit_errors;
  double ber;
  double mean_sum_rate;
  double mean_selected_branch;
} MbthpRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds an experiment from config text (flat `key = value` lines).
 * Returns NULL on error; see [`mbthp_last_error`].
 *
 * # Safety
 * `config_text` must be a valid NUL-terminated string.
 */
struct MbthpExperiment *mbthp_experiment_new(const char *config_text);

/**
 * Builds an experiment from a config file path. Returns NULL on error.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string.
 */
struct MbthpExperiment *mbthp_experiment_new_from_file(const char *path);

/**
 * Frees an experiment handle. NULL is accepted.
 *
 * # Safety
 * `handle` must be NULL or a pointer from an `mbthp_experiment_new*`
 * call, not freed before.
 */
void mbthp_experiment_free(struct MbthpExperiment *handle);

/**
 * Runs the configured metric (`ber` or `sumrate`) and stores the rows on
 * the handle.
 *
 * # Safety
 * `handle` must be a live experiment pointer.
 */
enum MbthpStatus mbthp_experiment_run(struct MbthpExperiment *handle);

/**
 * Number of result rows of a finished run.
 *
 * # Safety
 * `handle` must be a live experiment pointer and `out_count` writable.
 */
enum MbthpStatus mbthp_experiment_row_count(const struct MbthpExperiment *handle,
                                            uintptr_t *out_count);

/**
 * Copies row `index` of a finished run into `out_row`.
 *
 * # Safety
 * `handle` must be a live experiment pointer and `out_row` writable.
 */
enum MbthpStatus mbthp_experiment_row(const struct MbthpExperiment *handle,
                                      uintptr_t index,
                                      struct MbthpRow *out_row);

/**
 * Writes the CSV of a finished run to `path`.
 *
 * # Safety
 * `handle` must be a live experiment pointer and `path` a valid
 * NUL-terminated string.
 */
enum MbthpStatus mbthp_experiment_write_csv(const struct MbthpExperiment *handle, const char *path);

/**
 * Closed-form FLOP count. Algorithm names match the CLI: zf, mmse, bd,
 * rbd, zf-thp, mmse-thp-inversion, mmse-thp, mb-zf-thp, mb-mmse-thp, vp.
 *
 * # Safety
 * `algorithm` must be a valid NUL-terminated string and `out_flops`
 * writable.
 */
enum MbthpStatus mbthp_flops(const char *algorithm,
                             uint64_t n,
                             uint64_t num_users,
                             uint64_t antennas_per_user,
                             uint64_t branches,
                             uint64_t constellation_size,
                             double sphere_radius,
                             uint64_t *out_flops);

/**
 * Noise variance from the Eb/N0 definition for a square system.
 *
 * # Safety
 * `out_variance` must be writable.
 */
enum MbthpStatus mbthp_noise_variance(double ebno_db,
                                      uint64_t num_tx,
                                      uint32_t bits_per_symbol,
                                      double *out_variance);

/**
 * Copies the last error message for this thread into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length.
 *
 * # Safety
 * `buf` must be NULL or writable for `len` bytes.
 */
uintptr_t mbthp_last_error(char *buf, uintptr_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mbthp_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MBTHP_H */
