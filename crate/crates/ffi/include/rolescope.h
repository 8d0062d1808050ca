#ifndef ROLESCOPE_H
#define ROLESCOPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * How an absent period is placed when scoring role changes.
 */
typedef enum RsAbsentMode {
  /**
   * Absent sits at the origin of factor space.
   */
  RS_ABSENT_MODE_ORIGIN = 0,
  /**
   * Steps into or out of absence are not counted.
   */
  RS_ABSENT_MODE_SKIP = 1,
} RsAbsentMode;

/**
 * Result of every call; anything but `Ok` leaves a message for
 * [`rs_last_error_message`].
 */
typedef enum RsStatus {
  RS_STATUS_OK = 0,
  RS_STATUS_NULL_POINTER = 1,
  RS_STATUS_INVALID_ARGUMENT = 2,
  RS_STATUS_BUFFER_TOO_SMALL = 3,
  RS_STATUS_NO_DATA = 4,
  RS_STATUS_NUMERICAL_FAILURE = 5,
  RS_STATUS_PANIC = 6,
} RsStatus;

/**
 * Ward merge tree.
 */
typedef struct RsDendrogram RsDendrogram;

/**
 * Fitted factor model plus the scores of the rows it was fit on.
 */
typedef struct RsFactorModel RsFactorModel;

typedef struct RsMerge {
  size_t left;
  size_t right;
  double height;
  size_t size;
} RsMerge;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library from the same thread.
 */
const char *rs_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rs_version(void);

/**
 * Standardize an `n_rows` x `n_cols` matrix, extract factors by iterated
 * principal-axis factoring (Kaiser criterion), rotate with quartimin and
 * compute regression scores. Zero tolerances or iteration caps select the
 * defaults. Constant columns are dropped before fitting.
 *
 * # Safety
 * `data` must point to `n_rows * n_cols` doubles and `out` to writable
 * handle storage.
 */
enum RsStatus rs_factor_fit(const double *data,
                            size_t n_rows,
                            size_t n_cols,
                            double tol,
                            size_t max_iter,
                            struct RsFactorModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`rs_factor_fit`] not yet freed.
 */
void rs_factor_free(struct RsFactorModel *model);

/**
 * Retained factor count, kept variable count and row count.
 *
 * # Safety
 * `model` must be a live handle; the out pointers may be null.
 */
enum RsStatus rs_factor_shape(const struct RsFactorModel *model,
                              size_t *k,
                              size_t *n_vars,
                              size_t *n_rows);

/**
 * Pattern loadings, kept variables x factors.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum RsStatus rs_factor_loadings(const struct RsFactorModel *model, double *out, size_t len);

/**
 * Factor correlation matrix, factors x factors.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum RsStatus rs_factor_phi(const struct RsFactorModel *model, double *out, size_t len);

/**
 * Communality of each kept variable.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum RsStatus rs_factor_communalities(const struct RsFactorModel *model, double *out, size_t len);

/**
 * Eigenvalues of the correlation matrix, descending.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum RsStatus rs_factor_eigenvalues(const struct RsFactorModel *model, double *out, size_t len);

/**
 * Factor scores, rows x factors.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum RsStatus rs_factor_scores(const struct RsFactorModel *model, double *out, size_t len);

/**
 * Ward clustering of `n` points of dimension `dim`.
 *
 * # Safety
 * `data` must hold `n * dim` doubles; `out` must be writable.
 */
enum RsStatus rs_ward(const double *data, size_t n, size_t dim, struct RsDendrogram **out);

/**
 * # Safety
 * `tree` must be null or a handle from [`rs_ward`] not yet freed.
 */
void rs_dendrogram_free(struct RsDendrogram *tree);

/**
 * Number of leaves; the tree has one merge fewer.
 *
 * # Safety
 * `tree` must be a live handle and `out` writable.
 */
enum RsStatus rs_dendrogram_leaves(const struct RsDendrogram *tree, size_t *out);

/**
 * Copy the merges in order. Leaves are nodes `0..n`, merge `i` creates node
 * `n + i`, and heights are the Ward merge costs.
 *
 * # Safety
 * `out` must hold `len` merges.
 */
enum RsStatus rs_dendrogram_merges(const struct RsDendrogram *tree,
                                   struct RsMerge *out,
                                   size_t len);

/**
 * Flat labels `0..k` for every leaf after cutting the tree into `k`
 * clusters, numbered by their smallest leaf.
 *
 * # Safety
 * `labels` must hold `len` values.
 */
enum RsStatus rs_dendrogram_cut(const struct RsDendrogram *tree,
                                size_t k,
                                size_t *labels,
                                size_t len);

/**
 * Per-point silhouette values. `mean` (optional) receives their mean.
 * Fails when fewer than two clusters are present.
 *
 * # Safety
 * `data` must hold `n * dim` doubles, `labels` and `out` `n` values.
 */
enum RsStatus rs_silhouette(const double *data,
                            size_t n,
                            size_t dim,
                            const size_t *labels,
                            double *out,
                            double *mean);

/**
 * Role change intensity of one trajectory.
 *
 * `sequence` holds one slot per period: 0 for absent, otherwise a 1-based
 * role id indexing the rows of `centroids` (`n_roles` x `dim`). On success
 * `has_value` tells whether the trajectory changed role at all; `value` is
 * then the log10 of the summed centroid distances.
 *
 * # Safety
 * Pointers must cover the stated lengths; `value` and `has_value` writable.
 */
enum RsStatus rs_rci(const size_t *sequence,
                     size_t len,
                     const double *centroids,
                     size_t n_roles,
                     size_t dim,
                     enum RsAbsentMode mode,
                     double *value,
                     bool *has_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROLESCOPE_H */
