/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef OCTMARGIN_H
#define OCTMARGIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum OctStatus {
  OCT_STATUS_OK = 0,
  /**
   * Invalid argument or configuration.
   */
  OCT_STATUS_USAGE = 1,
  /**
   * Array dimensions do not fit the model or volume.
   */
  OCT_STATUS_SHAPE = 2,
  /**
   * Non-finite values or diverged training.
   */
  OCT_STATUS_NUMERIC = 3,
  /**
   * Malformed file or checksum mismatch.
   */
  OCT_STATUS_FORMAT = 4,
  OCT_STATUS_IO = 5,
  OCT_STATUS_EMPTY = 6,
  OCT_STATUS_SAMPLER = 7,
  OCT_STATUS_STALE_CACHE = 8,
  OCT_STATUS_NULL_POINTER = 9,
  /**
   * A Rust panic was caught at the boundary.
   */
  OCT_STATUS_INTERNAL = 10,
} OctStatus;

/**
 * A trained classifier.
 */
typedef struct OctModel OctModel;

/**
 * A B-scan volume.
 */
typedef struct OctVolume OctVolume;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *oct_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *oct_version(void);

/**
 * Loads an `OCTM` checkpoint into `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum OctStatus oct_model_load(const char *path, struct OctModel **out);

/**
 * Writes the model as an `OCTM` checkpoint.
 *
 * # Safety
 * `model` must come from [`oct_model_load`]; `path` must be NUL-terminated.
 */
enum OctStatus oct_model_save(const struct OctModel *model, const char *path);

/**
 * Releases a model; null is ignored.
 *
 * # Safety
 * `model` must come from [`oct_model_load`] and not be used afterwards.
 */
void oct_model_free(struct OctModel *model);

/**
 * Number of values in one input patch (3·32·32 for the standard network).
 *
 * # Safety
 * `model` must be null or come from [`oct_model_load`].
 */
size_t oct_model_input_len(const struct OctModel *model);

/**
 * Tumor probability for `count` patches stored contiguously in `inputs`
 * (`count · oct_model_input_len` values, channel-major), written to
 * `scores[0..count]`.
 *
 * # Safety
 * `inputs` and `scores` must point to arrays of the stated sizes.
 */
enum OctStatus oct_model_tumor_scores(const struct OctModel *model,
                                      const double *inputs,
                                      size_t count,
                                      double *scores);

/**
 * Loads an `OCTV` volume into `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum OctStatus oct_volume_load(const char *path, struct OctVolume **out);

/**
 * Releases a volume; null is ignored.
 *
 * # Safety
 * `volume` must come from [`oct_volume_load`] and not be used afterwards.
 */
void oct_volume_free(struct OctVolume *volume);

/**
 * Writes rows, cols and frames of the volume.
 *
 * # Safety
 * All pointers must be valid.
 */
enum OctStatus oct_volume_dims(const struct OctVolume *volume,
                               size_t *rows,
                               size_t *cols,
                               size_t *frames);

/**
 * Detects the tissue surface of one frame with default parameters and
 * writes one row index per column (`cols` values) to `rows_out`.
 *
 * # Safety
 * `rows_out` must hold at least `cols` values.
 */
enum OctStatus oct_volume_detect_surface(const struct OctVolume *volume,
                                         size_t frame,
                                         double *rows_out);

/**
 * Area under the ROC curve of tumor scores in `[0, 1]` against labels
 * (1 = tumor, 0 = normal). Fails with `Empty` when only one class occurs.
 *
 * # Safety
 * `scores` and `labels` must hold `count` values; `auc` must be valid.
 */
enum OctStatus oct_roc_auc(const double *scores, const uint8_t *labels, size_t count, double *auc);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OCTMARGIN_H */
