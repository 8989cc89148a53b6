#ifndef CHILDVOICE_H
#define CHILDVOICE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CvStatus {
  CV_STATUS_OK = 0,
  CV_STATUS_NULL_POINTER = 1,
  CV_STATUS_INVALID_INPUT = 2,
  CV_STATUS_IO = 3,
  CV_STATUS_INSUFFICIENT_DATA = 4,
  CV_STATUS_PARSE = 5,
  CV_STATUS_BUFFER_TOO_SMALL = 6,
  CV_STATUS_PANIC = 7,
} CvStatus;

/**
 * Fitted factor set.
 */
typedef struct CvFactorSet CvFactorSet;

/**
 * Trained extremely randomized forest.
 */
typedef struct CvForest CvForest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length in
 * bytes, or 0 when there is none.
 */
size_t cv_last_error(char *buf, size_t len);

/**
 * Number of features in the full inventory.
 */
size_t cv_inventory_len(void);

/**
 * Static, NUL-terminated name of inventory feature `index`, or null when
 * out of range.
 */
const char *cv_inventory_name(size_t index);

/**
 * Analyzes mono PCM samples in [-1, 1] with default settings and writes
 * the inventory-ordered feature vector (pF is always NaN; it needs a
 * cohort).
 */
enum CvStatus cv_analyze_pcm(const double *samples,
                             size_t n_samples,
                             uint32_t sample_rate,
                             double *out,
                             size_t out_len);

/**
 * [`cv_analyze_pcm`] on a 16-bit PCM WAV file.
 */
enum CvStatus cv_analyze_wav(const char *path, double *out, size_t out_len);

/**
 * Per-class F1 of two label arrays (codes 0 = F, 1 = M). Undefined class
 * scores are NaN.
 */
enum CvStatus cv_f1_scores(const int *truth,
                           const int *predicted,
                           size_t n,
                           double *f1_f,
                           double *f1_m,
                           double *mean_f1,
                           double *weighted_f1);

/**
 * Welch t-test of `a` against `b`.
 */
enum CvStatus cv_welch_t(const double *a,
                         size_t n_a,
                         const double *b,
                         size_t n_b,
                         double *t,
                         double *df,
                         double *p);

/**
 * Cohen's d of `a` minus `b` with the pooled standard deviation.
 */
enum CvStatus cv_cohens_d(const double *a, size_t n_a, const double *b, size_t n_b, double *d);

/**
 * Clusters the columns of a row-major `n_rows x n_cols` matrix. Column
 * `j` is named `x{j}`.
 */
enum CvStatus cv_factors_fit(const double *x,
                             size_t n_rows,
                             size_t n_cols,
                             double cutoff,
                             struct CvFactorSet **out);

enum CvStatus cv_factors_from_json(const char *json, struct CvFactorSet **out);

void cv_factors_free(struct CvFactorSet *f);

enum CvStatus cv_factors_len(const struct CvFactorSet *f, size_t *out);

/**
 * Number of input columns the factor set expects.
 */
enum CvStatus cv_factors_n_inputs(const struct CvFactorSet *f, size_t *out);

/**
 * Projects one row (columns in the fitting order) onto the factors.
 */
enum CvStatus cv_factors_transform(const struct CvFactorSet *f,
                                   const double *row,
                                   size_t n,
                                   double *out,
                                   size_t out_len);

/**
 * Trains a forest on a row-major `n_rows x n_cols` matrix with labels
 * `y` (0 = F, 1 = M). `k_features` 0 means floor(sqrt(n_cols)) and
 * `max_depth` 0 means unlimited.
 */
enum CvStatus cv_forest_train(const double *x,
                              size_t n_rows,
                              size_t n_cols,
                              const int *y,
                              size_t n_trees,
                              size_t k_features,
                              size_t min_samples_split,
                              size_t max_depth,
                              uint64_t seed,
                              struct CvForest **out);

enum CvStatus cv_forest_from_json(const char *json, struct CvForest **out);

/**
 * Serializes the forest to a newly allocated JSON string, released with
 * [`cv_string_free`].
 */
enum CvStatus cv_forest_to_json(const struct CvForest *f, char **out);

void cv_string_free(char *s);

void cv_forest_free(struct CvForest *f);

enum CvStatus cv_forest_n_features(const struct CvForest *f, size_t *out);

/**
 * Predicts one row. `vote_f` receives the fraction of trees voting F.
 */
enum CvStatus cv_forest_predict(const struct CvForest *f,
                                const double *row,
                                size_t n,
                                int *label,
                                double *vote_f);

/**
 * Normalized impurity importance, one weight per input column.
 */
enum CvStatus cv_forest_importance(const struct CvForest *f, double *out, size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHILDVOICE_H */
