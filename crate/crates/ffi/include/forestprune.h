#ifndef FORESTPRUNE_H
#define FORESTPRUNE_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum FpStatus {
  FP_STATUS_OK = 0,
  FP_STATUS_NULL_POINTER = 1,
  FP_STATUS_INVALID_ARGUMENT = 2,
  FP_STATUS_IO = 3,
  FP_STATUS_PARSE = 4,
  FP_STATUS_CONFIG = 5,
  FP_STATUS_INTERNAL = 6,
  FP_STATUS_PANIC = 7,
} FpStatus;

/**
 * A feature matrix with its response.
 */
typedef struct FpDataset FpDataset;

/**
 * A fitted forest.
 */
typedef struct FpForest FpForest;

/**
 * The outcome of pruning a forest.
 */
typedef struct FpPruneResult FpPruneResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL if none failed.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *fp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fp_version(void);

void fp_string_free(char *s);

/**
 * Builds a dataset from a row-major `n_rows × n_cols` feature array.
 * Columns are named `x1..x{n_cols}`.
 */
enum FpStatus fp_dataset_from_rows(const double *features,
                                   size_t n_rows,
                                   size_t n_cols,
                                   const double *response,
                                   struct FpDataset **out);

/**
 * Loads a headed CSV file; non-numeric columns are one-hot encoded.
 */
enum FpStatus fp_dataset_load_csv(const char *path,
                                  const char *response_column,
                                  struct FpDataset **out);

/**
 * Draws the synthetic scenario `y = x_1 + … + x_k + ε` with ten predictors.
 */
enum FpStatus fp_dataset_generate(size_t n,
                                  size_t relevant_vars,
                                  double noise_variance,
                                  uint64_t seed,
                                  struct FpDataset **out);

/**
 * Row count, or 0 for NULL.
 */
size_t fp_dataset_n_rows(const struct FpDataset *ds);

/**
 * Feature count, or 0 for NULL.
 */
size_t fp_dataset_n_cols(const struct FpDataset *ds);

void fp_dataset_free(struct FpDataset *ds);

/**
 * Fits `n_trees` bootstrap CART trees with default stopping rules on every
 * row of `ds`.
 */
enum FpStatus fp_forest_fit(const struct FpDataset *ds,
                            size_t n_trees,
                            double subspace_rate,
                            uint64_t seed,
                            struct FpForest **out);

enum FpStatus fp_forest_from_json(const char *json, struct FpForest **out);

enum FpStatus fp_forest_to_json(const struct FpForest *forest, char **out);

/**
 * Tree count, or 0 for NULL.
 */
size_t fp_forest_n_trees(const struct FpForest *forest);

/**
 * Predicts every row of `ds` into `out` (length `out_len == n_rows`).
 * With `weights == NULL` the trees are averaged; otherwise `n_weights` must
 * equal the tree count and the prediction is `Σ w_i t_i`.
 */
enum FpStatus fp_forest_predict(const struct FpForest *forest,
                                const struct FpDataset *ds,
                                const double *weights,
                                size_t n_weights,
                                double *out,
                                size_t out_len);

void fp_forest_free(struct FpForest *forest);

/**
 * Prunes `forest` on every row of `validation`. `method` is one of `SFS`,
 * `SBS'`, `BSF`, `LASSO` or a sized variant such as `BSF3` or `LASSO4`;
 * `seed` drives the Lasso cross-validation folds.
 */
enum FpStatus fp_prune(const struct FpForest *forest,
                       const struct FpDataset *validation,
                       const char *method,
                       uint64_t seed,
                       struct FpPruneResult **out);

/**
 * Number of selected trees, or 0 for NULL.
 */
size_t fp_prune_result_n_selected(const struct FpPruneResult *r);

/**
 * Copies the ascending selected tree indices into `out` (length `len`).
 */
enum FpStatus fp_prune_result_selected(const struct FpPruneResult *r, size_t *out, size_t len);

/**
 * Copies the weights of the selected trees into `out` (length `len`).
 */
enum FpStatus fp_prune_result_weights(const struct FpPruneResult *r, double *out, size_t len);

/**
 * Validation MSPE of the selection, or NaN for NULL.
 */
double fp_prune_result_validation_mspe(const struct FpPruneResult *r);

enum FpStatus fp_prune_result_to_json(const struct FpPruneResult *r, char **out);

void fp_prune_result_free(struct FpPruneResult *r);

/**
 * Merges the selected trees into one tree and writes its text dump.
 * Fails with `InvalidArgument` when the merge would exceed `max_leaves`.
 */
enum FpStatus fp_merge_to_text(const struct FpForest *forest,
                               const struct FpPruneResult *r,
                               size_t max_leaves,
                               char **out);

/**
 * Slack of the Lasso generalization bound.
 */
enum FpStatus fp_lasso_generalization_bound(double n,
                                            size_t b,
                                            double delta,
                                            double m,
                                            double r,
                                            double lambda_l1,
                                            double *out);

/**
 * Slack of the best-sub-forest bound; requires `1 <= k <= b/2`.
 */
enum FpStatus fp_bsf_bound(double n, size_t b, size_t k, double delta, double m, double *out);

/**
 * Slack of the forward-selection bound; requires even `b`.
 */
enum FpStatus fp_sfs_bound(double n, size_t b, double delta, double m, double *out);

enum FpStatus fp_finite_class_bound(uint64_t cardinality,
                                    double n,
                                    double delta,
                                    double m,
                                    double *out);

/**
 * Out-of-sample risk bound of the non-negative Lasso.
 */
enum FpStatus fp_lasso_risk_bound(double tau,
                                  double m,
                                  double sigma,
                                  size_t b,
                                  double n,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FORESTPRUNE_H */
