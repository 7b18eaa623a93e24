#ifndef REINSOPT_H
#define REINSOPT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ReinsRiskMeasure {
  REINS_RISK_MEASURE_VAR = 0,
  REINS_RISK_MEASURE_CVAR = 1,
} ReinsRiskMeasure;

typedef enum ReinsPrinciple {
  REINS_PRINCIPLE_EXPECTED = 0,
  REINS_PRINCIPLE_MIXED_ESSCHER = 1,
} ReinsPrinciple;

typedef enum ReinsStatus {
  REINS_STATUS_OK = 0,
  REINS_STATUS_NULL_POINTER = 1,
  REINS_STATUS_INVALID_PARAMETER = 2,
  REINS_STATUS_INFINITE_MOMENT = 3,
  REINS_STATUS_NON_POSITIVE_SURPLUS = 4,
  REINS_STATUS_TILT_OVERFLOW = 5,
  REINS_STATUS_INFEASIBLE = 6,
  REINS_STATUS_DEGENERATE_DATA = 7,
  REINS_STATUS_NON_CONVERGENCE = 8,
  REINS_STATUS_NUMERICAL = 9,
  REINS_STATUS_IO = 10,
  REINS_STATUS_PANIC = 99,
} ReinsStatus;

typedef enum ReinsFamily {
  REINS_FAMILY_GAMMA = 0,
  REINS_FAMILY_LOGNORMAL = 1,
  REINS_FAMILY_PARETO = 2,
  /**
   * Normal model of the total; p1 = mean, p2 = sd.
   */
  REINS_FAMILY_GAUSSIAN_APPROX = 3,
} ReinsFamily;

typedef enum ReinsPrior {
  REINS_PRIOR_INFORMATIVE = 0,
  REINS_PRIOR_JEFFREYS = 1,
} ReinsPrior;

/**
 * Opaque sorted loss sample.
 */
typedef struct ReinsSample ReinsSample;

typedef struct ReinsCriterionConfig {
  double insurer_loading;
  double reinsurer_loading;
  double cost_of_capital;
  double level;
  double tilt;
  enum ReinsRiskMeasure risk_measure;
  enum ReinsPrinciple principle;
} ReinsCriterionConfig;

/**
 * Portfolio and severity. Gamma and Pareto take (shape, scale), Lognormal
 * (log mean, log sd).
 */
typedef struct ReinsModel {
  enum ReinsFamily family;
  double p1;
  double p2;
  uint64_t policies;
  double intensity;
  double horizon;
} ReinsModel;

typedef struct ReinsOptimum {
  double retention;
  /**
   * Upper end of the layer, not its width.
   */
  double limit;
  double value;
  uint64_t evaluations;
  bool converged;
} ReinsOptimum;

typedef struct ReinsDegradation {
  double mean;
  double sd;
  uint64_t replicates;
  uint64_t dropped;
  /**
   * C at the optimum of the reference sample.
   */
  double base_ratio;
} ReinsDegradation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *reins_version(void);

/**
 * Message of the last failure on this thread, or an empty string. Valid
 * until the next failing call on the same thread.
 */
const char *reins_last_error_message(void);

/**
 * Defaults: gamma 0.1, gamma_r 0.2, beta 0, eps 0.01, omega 0.001, VaR,
 * expected premium.
 */
struct ReinsCriterionConfig reins_criterion_config_default(void);

/**
 * Simulates `m` totals; on success `*out` owns a new sample.
 *
 * # Safety
 * `model` must point to a valid `ReinsModel`; `out` must be writable.
 */
enum ReinsStatus reins_simulate(const struct ReinsModel *model,
                                size_t m,
                                uint64_t seed,
                                struct ReinsSample **out);

/**
 * Wraps `len` loss values (copied and sorted).
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` must be writable.
 */
enum ReinsStatus reins_sample_from_values(const double *values,
                                          size_t len,
                                          struct ReinsSample **out);

/**
 * Releases a sample; null is ignored.
 *
 * # Safety
 * `sample` must come from this library and not be used afterwards.
 */
void reins_sample_free(struct ReinsSample *sample);

/**
 * Number of totals, 0 for null.
 *
 * # Safety
 * `sample` must be null or a live handle.
 */
size_t reins_sample_len(const struct ReinsSample *sample);

/**
 * Copies the sorted values into `buf`, which must hold `reins_sample_len`
 * doubles (`cap` is checked).
 *
 * # Safety
 * `buf` must point to `cap` writable doubles.
 */
enum ReinsStatus reins_sample_copy_values(const struct ReinsSample *sample,
                                          double *buf,
                                          size_t cap);

/**
 * # Safety
 * `sample` must be a live handle and `out` writable.
 */
enum ReinsStatus reins_sample_mean(const struct ReinsSample *sample, double *out);

/**
 * Empirical VaR at level `eps` (upper tail).
 *
 * # Safety
 * `sample` must be a live handle and `out` writable.
 */
enum ReinsStatus reins_sample_quantile(const struct ReinsSample *sample, double eps, double *out);

/**
 * Criterion C for the layer ceding min(max(x - retention, 0), limit - retention).
 * `limit` is the upper end of the layer; (0, 0) means no reinsurance.
 *
 * # Safety
 * Pointers must be valid; `out` writable.
 */
enum ReinsStatus reins_criterion_ratio(const struct ReinsSample *sample,
                                       const struct ReinsCriterionConfig *config,
                                       double retention,
                                       double limit,
                                       double *out);

/**
 * Reinsurance premium of the layer under the configured principle.
 *
 * # Safety
 * Pointers must be valid; `out` writable.
 */
enum ReinsStatus reins_premium(const struct ReinsSample *sample,
                               const struct ReinsCriterionConfig *config,
                               double retention,
                               double limit,
                               double *out);

/**
 * Nelder-Mead optimum of the criterion.
 *
 * # Safety
 * Pointers must be valid; `out` writable.
 */
enum ReinsStatus reins_optimize(const struct ReinsSample *sample,
                                const struct ReinsCriterionConfig *config,
                                struct ReinsOptimum *out);

/**
 * Grid-and-bisection optimum, for cross-checking `reins_optimize`.
 *
 * # Safety
 * Pointers must be valid; `out` writable.
 */
enum ReinsStatus reins_verify(const struct ReinsSample *sample,
                              const struct ReinsCriterionConfig *config,
                              struct ReinsOptimum *out);

/**
 * Nested bootstrap of D with histories of `n` expected claims.
 *
 * # Safety
 * Pointers must be valid; `out` writable.
 */
enum ReinsStatus reins_bootstrap(const struct ReinsModel *model,
                                 const struct ReinsCriterionConfig *config,
                                 double n,
                                 size_t reps,
                                 size_t m,
                                 uint64_t seed,
                                 struct ReinsDegradation *out);

/**
 * Bayesian D for a historical portfolio of `history_policies` policies.
 *
 * # Safety
 * Pointers must be valid; `out` writable.
 */
enum ReinsStatus reins_bayes(const struct ReinsModel *model,
                             const struct ReinsCriterionConfig *config,
                             enum ReinsPrior prior,
                             double history_policies,
                             size_t reps,
                             size_t m,
                             uint64_t seed,
                             struct ReinsDegradation *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REINSOPT_H */
