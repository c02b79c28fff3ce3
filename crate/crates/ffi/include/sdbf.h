#ifndef SDBF_H
#define SDBF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum SdbfStatus {
  SDBF_STATUS_OK = 0,
  SDBF_STATUS_NULL_POINTER = 1,
  /**
   * Hypothesis syntax error, or infeasible or redundant constraints.
   */
  SDBF_STATUS_PARSE = 2,
  /**
   * Bad input data or arguments, or an unsupported request.
   */
  SDBF_STATUS_DATA = 3,
  SDBF_STATUS_NUMERICAL = 4,
  SDBF_STATUS_OUT_OF_RANGE = 5,
  SDBF_STATUS_PANIC = 6,
} SdbfStatus;

/**
 * A model built from sufficient statistics.
 */
typedef struct SdbfModel SdbfModel;

/**
 * The outcome of an analysis.
 */
typedef struct SdbfResult SdbfResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after success.
 * The pointer stays valid until the next call into this library.
 */
const char *sdbf_last_error(void);

/**
 * Byte offset of the last hypothesis syntax error, or -1.
 */
int64_t sdbf_last_error_position(void);

/**
 * Builds a model from a sufficient-statistics JSON document. `null_value`
 * overrides the t-test null value unless it is NaN.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SdbfStatus sdbf_model_from_json(const char *json, double null_value, struct SdbfModel **out);

/**
 * # Safety
 * `model` must come from [`sdbf_model_from_json`] and not be used afterwards.
 */
void sdbf_model_free(struct SdbfModel *model);

/**
 * Number of parameters, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t sdbf_model_param_count(const struct SdbfModel *model);

/**
 * Copies the name of parameter `index` into a new string, released with
 * [`sdbf_string_free`].
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum SdbfStatus sdbf_model_param_name(const struct SdbfModel *model, size_t index, char **out);

/**
 * Runs the exploratory tests and, if `hypothesis` is not null, the
 * confirmatory test. `prior` may be null for equal prior weights.
 * `n_draws` of 0 selects the default.
 *
 * # Safety
 * `model` must be a live handle, `hypothesis` null or a NUL-terminated
 * string, `prior` null or valid for `n_prior` reads, and `out` valid.
 */
enum SdbfStatus sdbf_analyze(const struct SdbfModel *model,
                             const char *hypothesis,
                             const double *prior,
                             size_t n_prior,
                             uint64_t seed,
                             size_t n_draws,
                             struct SdbfResult **out);

/**
 * # Safety
 * `result` must come from [`sdbf_analyze`] and not be used afterwards.
 */
void sdbf_result_free(struct SdbfResult *result);

/**
 * Number of confirmatory hypotheses including any complement; 0 when no
 * hypothesis was given.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t sdbf_result_hypothesis_count(const struct SdbfResult *result);

/**
 * Posterior probability and Bayes factor against the unconstrained model
 * of confirmatory hypothesis `index`.
 *
 * # Safety
 * `result` must be a live handle; `php` and `bf` valid or null.
 */
enum SdbfStatus sdbf_result_hypothesis(const struct SdbfResult *result,
                                       size_t index,
                                       double *php,
                                       double *bf);

/**
 * Renders the result as JSON (`as_json` nonzero) or as text tables. The
 * string is released with [`sdbf_string_free`].
 *
 * # Safety
 * `result` must be a live handle and `out` valid.
 */
enum SdbfStatus sdbf_result_render(const struct SdbfResult *result, int32_t as_json, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void sdbf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SDBF_H */
