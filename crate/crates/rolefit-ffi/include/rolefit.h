/* C ABI for rolefit checkpoints: thematic-fit scoring and rank correlation. */

#ifndef ROLEFIT_H
#define ROLEFIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call. `RF_OK` is zero; anything else
 * leaves a message in `rf_last_error`.
 */
typedef enum RfStatus {
  RF_OK = 0,
  RF_NULL_ARGUMENT = 1,
  RF_INVALID_UTF8 = 2,
  RF_BAD_CHECKPOINT = 3,
  RF_DEGENERATE = 4,
  RF_PANIC = 5,
} RfStatus;

/**
 * A loaded model snapshot: parameters plus the role inventory and
 * vocabulary they were trained with. Opaque; create with
 * `rf_checkpoint_open`, release with `rf_checkpoint_close`.
 */
typedef struct RfCheckpoint RfCheckpoint;

/**
 * Shape and provenance summary of an open checkpoint.
 */
typedef struct RfCheckpointInfo {
  /**
   * Embedding width.
   */
  uintptr_t dim;
  /**
   * Residual block count.
   */
  uintptr_t blocks;
  /**
   * Kept lemma count; the shared out-of-vocabulary slot is one more.
   */
  uintptr_t vocab_words;
  /**
   * Role inventory size including the reserved labels.
   */
  uintptr_t role_labels;
  /**
   * Training epoch the snapshot was taken at.
   */
  uintptr_t epoch;
} RfCheckpointInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string. Never freed.
 */
const char *rf_version(void);

/**
 * Message for the most recent failure on this thread. Valid until the
 * next failing call on the same thread. Never null.
 */
const char *rf_last_error(void);

/**
 * Load a checkpoint file. On success writes a handle to `out`; the caller
 * owns it and must release it with `rf_checkpoint_close`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid location for
 * one pointer; either may be null (reported as an error, not UB).
 */
enum RfStatus rf_checkpoint_open(const char *path, struct RfCheckpoint **out);

/**
 * Release a handle from `rf_checkpoint_open`. Null is a no-op.
 *
 * # Safety
 * `ckpt` must be null or a handle from `rf_checkpoint_open` that has not
 * been closed already.
 */
void rf_checkpoint_close(struct RfCheckpoint *ckpt);

/**
 * Describe an open checkpoint.
 *
 * # Safety
 * `ckpt` must be null or an open handle; `out` must be null or a valid
 * location for one `RfCheckpointInfo`.
 */
enum RfStatus rf_checkpoint_info(const struct RfCheckpoint *ckpt, struct RfCheckpointInfo *out);

/**
 * Word-head probability of `noun` filling `role` of `verb` under the
 * loaded model. Out-of-vocabulary lemmas map to the shared OOV slot and
 * unknown role labels to the UNKNOWN row, so every query yields a score.
 *
 * # Safety
 * `ckpt` must be null or an open handle; the three strings must be null or
 * NUL-terminated; `out` must be null or a valid location for one double.
 */
enum RfStatus rf_thematic_fit(const struct RfCheckpoint *ckpt,
                              const char *verb,
                              const char *role,
                              const char *noun,
                              double *out);

/**
 * Tie-aware rank correlation of two equal-length score lists. Fails with
 * `RF_DEGENERATE` when either list is constant, shorter than 2, or
 * contains non-finite values.
 *
 * # Safety
 * `xs` and `ys` must each point to `len` readable doubles (or be null,
 * reported as an error); `out` must be null or a valid location for one
 * double.
 */
enum RfStatus rf_spearman(const double *xs, const double *ys, uintptr_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROLEFIT_H */
