#ifndef RDSM_H
#define RDSM_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RdsmStatus {
  RDSM_STATUS_OK = 0,
  RDSM_STATUS_NULL_POINTER = 1,
  RDSM_STATUS_INVALID_ARGUMENT = 2,
  RDSM_STATUS_CONFIG = 3,
  RDSM_STATUS_DIMENSION_MISMATCH = 4,
  RDSM_STATUS_IO = 5,
  RDSM_STATUS_BUFFER_TOO_SMALL = 6,
  RDSM_STATUS_PANIC = 7,
} RdsmStatus;

typedef enum RdsmAlgorithm {
  RDSM_ALGORITHM_DSM = 0,
  RDSM_ALGORITHM_RDSM = 1,
} RdsmAlgorithm;

typedef enum RdsmDegeneracy {
  RDSM_DEGENERACY_NONE = 0,
  RDSM_DEGENERACY_EDGE = 1,
  RDSM_DEGENERACY_VOLUME = 2,
  RDSM_DEGENERACY_BOTH = 3,
} RdsmDegeneracy;

/**
 * Optimizer settings.
 */
typedef struct RdsmConfig RdsmConfig;

/**
 * Objective function, domain and noise.
 */
typedef struct RdsmObjective RdsmObjective;

/**
 * Finished run.
 */
typedef struct RdsmRun RdsmRun;

/**
 * Cost callback: `x` points at `n` coordinates.
 */
typedef double (*RdsmCostFn)(const double *x, size_t n, void *user_data);

/**
 * Operation coefficients, degeneracy thresholds and initial simplex
 * coefficient.
 */
typedef struct RdsmCoefficients {
  double alpha;
  double gamma;
  double rho;
  double sigma;
  double edge_threshold;
  double volume_threshold;
  double initial_simplex_coeff;
} RdsmCoefficients;

typedef struct RdsmDegeneracyReport {
  double epsilon_e;
  double epsilon_v;
  enum RdsmDegeneracy classification;
} RdsmDegeneracyReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *rdsm_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rdsm_version(void);

/**
 * Built-in objective by name: `linear-gradient`, `linear-gradient-obstacle`
 * or `rosenbrock`. `dimension` 0 picks the objective's natural dimension.
 */
enum RdsmStatus rdsm_objective_builtin(const char *name,
                                       size_t dimension,
                                       struct RdsmObjective **out);

/**
 * Objective backed by a C callback. `user_data` is passed through
 * unchanged and must outlive the objective.
 */
enum RdsmStatus rdsm_objective_from_callback(size_t dimension,
                                             RdsmCostFn cost,
                                             void *user_data,
                                             struct RdsmObjective **out);

/**
 * Sets an inclusive box domain; points outside cost +inf.
 */
enum RdsmStatus rdsm_objective_set_bounds(struct RdsmObjective *objective,
                                          const double *lower,
                                          const double *upper,
                                          size_t n);

/**
 * `uniform:a,b` or `gaussian:variance`; null clears the noise.
 */
enum RdsmStatus rdsm_objective_set_noise(struct RdsmObjective *objective, const char *noise);

/**
 * Multiplier applied to the cost during optimization; reported costs are
 * unscaled.
 */
enum RdsmStatus rdsm_objective_set_scale(struct RdsmObjective *objective, double scale);

enum RdsmStatus rdsm_objective_dimension(const struct RdsmObjective *objective, size_t *out);

/**
 * Noise-free, unscaled cost at `x`.
 */
enum RdsmStatus rdsm_objective_value(const struct RdsmObjective *objective,
                                     const double *x,
                                     size_t n,
                                     double *out);

void rdsm_objective_free(struct RdsmObjective *objective);

/**
 * Default settings for `algorithm`.
 */
enum RdsmStatus rdsm_config_new(enum RdsmAlgorithm algorithm, struct RdsmConfig **out);

enum RdsmStatus rdsm_config_get_coefficients(const struct RdsmConfig *config,
                                             struct RdsmCoefficients *out);

/**
 * Replaces all coefficients; rejected values leave the config unchanged.
 */
enum RdsmStatus rdsm_config_set_coefficients(struct RdsmConfig *config,
                                             const struct RdsmCoefficients *coefficients);

enum RdsmStatus rdsm_config_set_budget(struct RdsmConfig *config,
                                       size_t max_iterations,
                                       size_t max_evaluations);

/**
 * Reevaluation fires at counter `ceil(factor * n)`; pass infinity to
 * disable it.
 */
enum RdsmStatus rdsm_config_set_reevaluation_factor(struct RdsmConfig *config, double factor);

/**
 * `auto`, `relative` or `domain`.
 */
enum RdsmStatus rdsm_config_set_initial_rule(struct RdsmConfig *config, const char *rule);

void rdsm_config_free(struct RdsmConfig *config);

/**
 * Optimizes `objective` from `x0` (length `n`).
 */
enum RdsmStatus rdsm_run(const struct RdsmConfig *config,
                         const struct RdsmObjective *objective,
                         const double *x0,
                         size_t n,
                         uint64_t seed,
                         struct RdsmRun **out);

enum RdsmStatus rdsm_run_dimension(const struct RdsmRun *run, size_t *out);

/**
 * Copies the best vertex into `out`, which must hold `len >= dimension`
 * doubles.
 */
enum RdsmStatus rdsm_run_endpoint(const struct RdsmRun *run, double *out, size_t len);

/**
 * Stored cost of the best vertex, unscaled.
 */
enum RdsmStatus rdsm_run_best_cost(const struct RdsmRun *run, double *out);

enum RdsmStatus rdsm_run_iterations(const struct RdsmRun *run, size_t *out);

/**
 * Raw objective calls, including corrections and reevaluations.
 */
enum RdsmStatus rdsm_run_evaluations(const struct RdsmRun *run, size_t *out);

enum RdsmStatus rdsm_run_degeneracy_events(const struct RdsmRun *run, size_t *out);

enum RdsmStatus rdsm_run_reevaluations(const struct RdsmRun *run, size_t *out);

/**
 * Writes the text archives and learning curve into `directory`.
 */
enum RdsmStatus rdsm_run_write_outputs(const struct RdsmRun *run,
                                       const char *directory,
                                       bool trajectory);

void rdsm_run_free(struct RdsmRun *run);

/**
 * Volume of the simplex with `n + 1` row-major vertices in dimension `n`.
 */
enum RdsmStatus rdsm_volume(const double *vertices, size_t n, double *out);

/**
 * Sum of all pairwise edge lengths.
 */
enum RdsmStatus rdsm_perimeter(const double *vertices, size_t n, double *out);

/**
 * Edge and volume ratios with the first vertex as anchor.
 */
enum RdsmStatus rdsm_detect_degeneracy(const double *vertices,
                                       size_t n,
                                       double edge_threshold,
                                       double volume_threshold,
                                       struct RdsmDegeneracyReport *out);

/**
 * Corrects a degenerate simplex in place, moving vertices worst cost first.
 * `costs` holds `n + 1` values; `moved` receives the number of relocated
 * vertices (0 when the simplex was not degenerate or no move helped).
 */
enum RdsmStatus rdsm_correct_degeneracy(double *vertices,
                                        const double *costs,
                                        size_t n,
                                        double edge_threshold,
                                        double volume_threshold,
                                        size_t *moved);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RDSM_H */
