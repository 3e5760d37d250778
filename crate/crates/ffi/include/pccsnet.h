#ifndef PCCSNET_H
#define PCCSNET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum PccsStatus {
  PCCS_STATUS_OK = 0,
  PCCS_STATUS_NULL_POINTER = 1,
  PCCS_STATUS_INVALID_ARGUMENT = 2,
  PCCS_STATUS_IO = 3,
  PCCS_STATUS_FORMAT = 4,
  PCCS_STATUS_CHECKSUM = 5,
  PCCS_STATUS_VERSION = 6,
  PCCS_STATUS_INTERNAL = 7,
} PccsStatus;

/**
 * A loaded model. Opaque to C callers.
 */
typedef struct PccsModel PccsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a checkpoint file and stores a new handle in `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PccsStatus pccs_model_load(const char *path, struct PccsModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `model` must come from [`pccs_model_load`] and not be used afterwards.
 */
void pccs_model_free(struct PccsModel *model);

/**
 * Number of modalities `K`, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t pccs_model_num_modalities(const struct PccsModel *model);

/**
 * Predicts the `k` most probable continuations of 8 observed points.
 *
 * `obs_xy` holds 16 doubles. On success `out_xy` receives `k × 24` doubles
 * (12 points per hypothesis), `out_prob` `k` probabilities in descending
 * order, and `out_modality` (may be null) the `k` modality ids.
 *
 * # Safety
 * All non-null pointers must reference buffers of the sizes above.
 */
enum PccsStatus pccs_model_predict(const struct PccsModel *model,
                                   const double *obs_xy,
                                   size_t k,
                                   double *out_xy,
                                   double *out_prob,
                                   size_t *out_modality);

/**
 * Constant-velocity extrapolation: 16 input doubles, 24 output doubles.
 *
 * # Safety
 * Buffers must have the sizes above.
 */
enum PccsStatus pccs_constant_velocity(const double *obs_xy, double *out_xy);

/**
 * Average displacement error over `steps` points.
 *
 * # Safety
 * `pred_xy` and `truth_xy` hold `2 × steps` doubles; `out` is valid.
 */
enum PccsStatus pccs_ade(const double *pred_xy, const double *truth_xy, size_t steps, double *out);

/**
 * Final displacement error over `steps` points.
 *
 * # Safety
 * As [`pccs_ade`].
 */
enum PccsStatus pccs_fde(const double *pred_xy, const double *truth_xy, size_t steps, double *out);

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *pccs_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *pccs_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PCCSNET_H */
