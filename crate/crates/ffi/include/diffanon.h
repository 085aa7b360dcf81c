#ifndef DIFFANON_H
#define DIFFANON_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DiffanonStatus {
  DIFFANON_STATUS_OK = 0,
  DIFFANON_STATUS_NULL_POINTER = 1,
  DIFFANON_STATUS_INVALID_ARGUMENT = 2,
  DIFFANON_STATUS_IO = 3,
  DIFFANON_STATUS_MODEL_FORMAT = 4,
  DIFFANON_STATUS_UNSUPPORTED_VERSION = 5,
  DIFFANON_STATUS_CHECKSUM = 6,
  DIFFANON_STATUS_DIMENSION_MISMATCH = 7,
  DIFFANON_STATUS_NON_FINITE = 8,
  DIFFANON_STATUS_EVALUATION = 9,
  DIFFANON_STATUS_PANIC = 10,
  DIFFANON_STATUS_INTERNAL = 11,
} DiffanonStatus;

typedef enum DiffanonFusion {
  DIFFANON_FUSION_SUB = 0,
  DIFFANON_FUSION_SUB2 = 1,
  DIFFANON_FUSION_ABS = 2,
} DiffanonFusion;

/**
 * Opaque trained model.
 */
typedef struct DiffanonModel DiffanonModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a model file. On success `*out` owns a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DiffanonStatus diffanon_model_load(const char *path, struct DiffanonModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`diffanon_model_load`] not yet freed.
 */
void diffanon_model_free(struct DiffanonModel *model);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum DiffanonStatus diffanon_model_input_dim(const struct DiffanonModel *model, size_t *out);

/**
 * Fusion scheme the model was trained with.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum DiffanonStatus diffanon_model_fusion(const struct DiffanonModel *model,
                                          enum DiffanonFusion *out);

/**
 * Anomaly score of a (reference, probe) pair; higher is more anomalous.
 *
 * # Safety
 * `reference` and `probe` must each point to `dim` doubles; `out` must be writable.
 */
enum DiffanonStatus diffanon_model_score_pair(const struct DiffanonModel *model,
                                              const double *reference,
                                              const double *probe,
                                              size_t dim,
                                              double *out);

/**
 * Anomaly score of an already fused vector.
 *
 * # Safety
 * `fused` must point to `dim` doubles; `out` must be writable.
 */
enum DiffanonStatus diffanon_model_score_fused(const struct DiffanonModel *model,
                                               const double *fused,
                                               size_t dim,
                                               double *out);

/**
 * Fuses two embeddings into `out` (`dim` doubles).
 *
 * # Safety
 * `a`, `b` and `out` must each point to `dim` doubles.
 */
enum DiffanonStatus diffanon_fuse(const double *a,
                                  const double *b,
                                  size_t dim,
                                  enum DiffanonFusion scheme,
                                  double *out);

/**
 * # Safety
 * Score arrays must hold `n_bona_fide` and `n_attack` doubles; outputs must be writable.
 */
enum DiffanonStatus diffanon_d_eer(const double *bona_fide,
                                   size_t n_bona_fide,
                                   const double *attack,
                                   size_t n_attack,
                                   double *rate,
                                   double *threshold);

/**
 * # Safety
 * Score arrays must hold `n_bona_fide` and `n_attack` doubles; `out` must be writable.
 */
enum DiffanonStatus diffanon_bpcer_at_apcer(const double *bona_fide,
                                            size_t n_bona_fide,
                                            const double *attack,
                                            size_t n_attack,
                                            double target_apcer,
                                            double *out);

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *diffanon_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *diffanon_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIFFANON_H */
