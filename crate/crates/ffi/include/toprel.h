#ifndef TOPREL_H
#define TOPREL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ToprelStatus {
  TOPREL_STATUS_OK = 0,
  TOPREL_STATUS_NULL_POINTER = 1,
  TOPREL_STATUS_INVALID_ARGUMENT = 2,
  TOPREL_STATUS_IO = 3,
  TOPREL_STATUS_PARSE = 4,
  /**
   * A coefficient is undefined for the input (zero variance, zero
   * denominator, singular covariance).
   */
  TOPREL_STATUS_UNDEFINED = 5,
  TOPREL_STATUS_NUMERICAL = 6,
  TOPREL_STATUS_PANIC = 7,
} ToprelStatus;

typedef enum ToprelCorpusFormat {
  TOPREL_CORPUS_FORMAT_LINE_TOKENS = 0,
  TOPREL_CORPUS_FORMAT_SPARSE_TRIPLETS = 1,
} ToprelCorpusFormat;

typedef enum ToprelPreset {
  TOPREL_PRESET_TRIVIAL = 0,
  TOPREL_PRESET_NONTRIVIAL = 1,
} ToprelPreset;

/**
 * Opaque corpus handle.
 */
typedef struct ToprelCorpus ToprelCorpus;

/**
 * Opaque handle to a set of fitted replications.
 */
typedef struct ToprelReplications ToprelReplications;

/**
 * Gibbs sampler settings. `alpha <= 0` selects 50/K.
 */
typedef struct ToprelLdaParams {
  size_t k;
  double alpha;
  double beta;
  size_t iterations;
  size_t burn_in;
  /**
   * Nonzero gives every replication the master seed.
   */
  int32_t fixed_seed;
} ToprelLdaParams;

/**
 * The headline coefficients. Undefined values are NaN.
 */
typedef struct ToprelCoefficients {
  double standard_practice;
  double stratified_alpha;
  double multivariate_omega;
  double maximal_reliability;
} ToprelCoefficients;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *toprel_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *toprel_version(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ToprelStatus toprel_corpus_load(const char *path,
                                     enum ToprelCorpusFormat format,
                                     struct ToprelCorpus **out);

/**
 * Generates a synthetic corpus from a preset.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ToprelStatus toprel_corpus_generate(enum ToprelPreset preset,
                                         uint64_t seed,
                                         struct ToprelCorpus **out);

/**
 * # Safety
 * `corpus` must come from this library; `path` must be NUL-terminated.
 */
enum ToprelStatus toprel_corpus_save(const struct ToprelCorpus *corpus,
                                     const char *path,
                                     enum ToprelCorpusFormat format);

/**
 * Number of documents; 0 for a null handle.
 *
 * # Safety
 * `corpus` must be null or a live handle.
 */
size_t toprel_corpus_num_docs(const struct ToprelCorpus *corpus);

/**
 * Vocabulary size; 0 for a null handle.
 *
 * # Safety
 * `corpus` must be null or a live handle.
 */
size_t toprel_corpus_vocab_size(const struct ToprelCorpus *corpus);

/**
 * # Safety
 * `corpus` must be null or a handle not yet freed.
 */
void toprel_corpus_free(struct ToprelCorpus *corpus);

/**
 * Fits `n_reps` replications in parallel.
 *
 * # Safety
 * `corpus` and `params` must be valid; `out` must be a valid pointer.
 */
enum ToprelStatus toprel_replications_fit(const struct ToprelCorpus *corpus,
                                          const struct ToprelLdaParams *params,
                                          size_t n_reps,
                                          uint64_t master_seed,
                                          struct ToprelReplications **out);

/**
 * # Safety
 * `reps` must be null or a live handle.
 */
size_t toprel_replications_len(const struct ToprelReplications *reps);

/**
 * # Safety
 * `reps` must be null or a live handle.
 */
size_t toprel_replications_k(const struct ToprelReplications *reps);

/**
 * Copies replication `index`'s K x V topic-word matrix, row-major, into
 * `buf`, which must hold `len >= K * V` values.
 *
 * # Safety
 * `reps` must be a live handle and `buf` valid for `len` writes.
 */
enum ToprelStatus toprel_replications_phi(const struct ToprelReplications *reps,
                                          size_t index,
                                          double *buf,
                                          size_t len);

/**
 * Overwrites replication `replace` with a near-uniform replication built
 * from replication `source`.
 *
 * # Safety
 * `reps` must be a live handle.
 */
enum ToprelStatus toprel_replications_inject_degenerate(struct ToprelReplications *reps,
                                                        size_t replace,
                                                        size_t source,
                                                        double epsilon,
                                                        uint64_t seed);

/**
 * # Safety
 * `reps` must be null or a handle not yet freed.
 */
void toprel_replications_free(struct ToprelReplications *reps);

/**
 * Scores the four coefficients with replication 0 as reference and the
 * last topic dropped. `top_n == 0` matches on full word distributions.
 *
 * # Safety
 * `reps` must be a live handle and `out` a valid pointer.
 */
enum ToprelStatus toprel_reliability(const struct ToprelReplications *reps,
                                     size_t top_n,
                                     double cutoff,
                                     struct ToprelCoefficients *out);

/**
 * The full reliability report as JSON. Release the string with
 * [`toprel_string_free`]. `bootstrap == 0` skips standard errors.
 *
 * # Safety
 * `reps` must be a live handle and `out` a valid pointer.
 */
enum ToprelStatus toprel_reliability_report_json(const struct ToprelReplications *reps,
                                                 size_t top_n,
                                                 double cutoff,
                                                 size_t bootstrap,
                                                 uint64_t seed,
                                                 char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void toprel_string_free(char *s);

/**
 * Cronbach's alpha of a row-major `n_obs x n_items` matrix.
 *
 * # Safety
 * `data` must hold `n_obs * n_items` values; `out` must be valid.
 */
enum ToprelStatus toprel_cronbach_alpha(const double *data,
                                        size_t n_obs,
                                        size_t n_items,
                                        double *out);

/**
 * McDonald's omega from a one-factor fit of a row-major
 * `n_obs x n_items` matrix.
 *
 * # Safety
 * `data` must hold `n_obs * n_items` values; `out` must be valid.
 */
enum ToprelStatus toprel_mcdonald_omega(const double *data,
                                        size_t n_obs,
                                        size_t n_items,
                                        double *out);

/**
 * # Safety
 * `out` must be valid.
 */
enum ToprelStatus toprel_spearman_brown(double r, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOPREL_H */
