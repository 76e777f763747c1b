#ifndef SEP_EDA_H
#define SEP_EDA_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; the non-zero values match the command-line exit codes.
 */
typedef enum SepStatus {
  SEP_STATUS_OK = 0,
  /**
   * Invalid argument or parameter.
   */
  SEP_STATUS_USAGE = 1,
  /**
   * Unreadable or malformed input data.
   */
  SEP_STATUS_DATA = 2,
  /**
   * Numerical failure, including too few equilibrium points.
   */
  SEP_STATUS_NUMERICAL = 3,
  /**
   * A required pointer was null.
   */
  SEP_STATUS_NULL_POINTER = 4,
  /**
   * Internal panic caught at the boundary.
   */
  SEP_STATUS_INTERNAL = 5,
} SepStatus;

typedef enum SepNormalization {
  SEP_NORMALIZATION_MIN_MAX = 0,
  SEP_NORMALIZATION_Z_SCORE = 1,
  SEP_NORMALIZATION_NONE = 2,
} SepNormalization;

typedef enum SepMethod {
  /**
   * Equilibrium-point pipeline.
   */
  SEP_METHOD_SEP = 0,
  /**
   * Full-data baseline.
   */
  SEP_METHOD_STANDARD = 1,
} SepMethod;

/**
 * Opaque dataset handle.
 */
typedef struct SepDataset SepDataset;

/**
 * Opaque result handle: cluster labels or a 2-D embedding.
 */
typedef struct SepResult SepResult;

/**
 * Pipeline tunables. Obtain defaults from [`sep_params_default`].
 */
typedef struct SepParams {
  size_t k_nn;
  double agg_threshold;
  /**
   * Kernel width; `<= 0` selects it from the data.
   */
  double kernel_q;
  double svc_c;
  double grad_tol;
  size_t max_descent_iters;
  size_t sep_knn;
  size_t kmeans_restarts;
  uint64_t seed;
  /**
   * t-SNE settings (ignored by clustering).
   */
  double perplexity;
  size_t tsne_iters;
  double learning_rate;
} SepParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library from the same thread.
 */
const char *sep_last_error_message(void);

struct SepParams sep_params_default(void);

/**
 * Copy a row-major `n x d` buffer into a new dataset. `labels` may be null;
 * otherwise it holds `n` class indices.
 *
 * # Safety
 * `values` must point to `n * d` doubles and `labels`, when non-null, to `n`
 * `size_t` values. `out` must be a valid pointer.
 */
enum SepStatus sep_dataset_from_buffer(const double *values,
                                       size_t n,
                                       size_t d,
                                       const size_t *labels,
                                       struct SepDataset **out);

/**
 * Load a CSV file (optionally with a trailing label column) and normalize it.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SepStatus sep_dataset_load_csv(const char *path,
                                    bool has_label_column,
                                    bool skip_header,
                                    enum SepNormalization normalization,
                                    struct SepDataset **out);

/**
 * # Safety
 * `dataset` must be null or a handle from this library not yet freed.
 */
void sep_dataset_free(struct SepDataset *dataset);

/**
 * Sample count, or 0 for a null handle.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t sep_dataset_n(const struct SepDataset *dataset);

/**
 * Feature count, or 0 for a null handle.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t sep_dataset_d(const struct SepDataset *dataset);

/**
 * Partition the dataset into `k` clusters. `params` may be null for defaults.
 *
 * # Safety
 * `dataset` must be a live handle, `params` null or valid, `out` valid.
 */
enum SepStatus sep_cluster(const struct SepDataset *dataset,
                           size_t k,
                           enum SepMethod method,
                           const struct SepParams *params,
                           struct SepResult **out);

/**
 * 2-D t-SNE embedding: of the equilibrium points for [`SepMethod::Sep`]
 * (with per-sample labels giving each sample's point) or of every sample
 * for [`SepMethod::Standard`].
 *
 * # Safety
 * As for [`sep_cluster`].
 */
enum SepStatus sep_tsne_embed(const struct SepDataset *dataset,
                              enum SepMethod method,
                              const struct SepParams *params,
                              struct SepResult **out);

/**
 * # Safety
 * `result` must be null or a handle from this library not yet freed.
 */
void sep_result_free(struct SepResult *result);

/**
 * Per-sample labels; `*len` receives the count. The pointer stays valid
 * until the result is freed.
 *
 * # Safety
 * `result` must be a live handle and `len` valid.
 */
const size_t *sep_result_labels(const struct SepResult *result, size_t *len);

/**
 * Row-major `points x 2` embedding coordinates (empty for clustering
 * results); `*points` receives the row count.
 *
 * # Safety
 * `result` must be a live handle and `points` valid.
 */
const double *sep_result_coords(const struct SepResult *result, size_t *points);

/**
 * Compressed-node and equilibrium-point counts of the run.
 *
 * # Safety
 * `result` must be a live handle; `m` and `s` may be null.
 */
enum SepStatus sep_result_sizes(const struct SepResult *result, size_t *m, size_t *s);

/**
 * Clustering accuracy under the best one-to-one label matching.
 *
 * # Safety
 * `pred` and `truth` must each point to `n` values; `acc` must be valid.
 */
enum SepStatus sep_accuracy(const size_t *pred, const size_t *truth, size_t n, double *acc);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEP_EDA_H */
