#ifndef MEANFIELD_H
#define MEANFIELD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MfStatus {
  MF_STATUS_OK = 0,
  MF_STATUS_NULL_POINTER = 1,
  MF_STATUS_INVALID_INPUT = 2,
  MF_STATUS_NUMERICAL = 3,
  MF_STATUS_UNSUPPORTED = 4,
  MF_STATUS_IO = 5,
  MF_STATUS_PANIC = 6,
} MfStatus;

typedef enum MfSolver {
  // Quantile coupling in one dimension, network simplex otherwise.
  MF_SOLVER_EXACT = 0,
  MF_SOLVER_NETWORK_SIMPLEX = 1,
  MF_SOLVER_SLICED = 2,
} MfSolver;

// Parsed experiment configuration.
typedef struct MfExperiment MfExperiment;

// Weighted point cloud.
typedef struct MfMeasure MfMeasure;

// Result of a log-log rate fit `d ≈ C N^(-alpha)`.
typedef struct MfRateFit {
  double alpha_hat;
  double c_hat;
  double residual;
  double slope_std_error;
} MfRateFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread. The pointer stays valid
// until the next failing call on the same thread.
const char *mf_last_error(void);

// Library version as a static string.
const char *mf_version(void);

// Builds a measure from `n` points of dimension `dim` (row-major) and `n`
// weights summing to one. A null `weights` gives equal weights.
//
// # Safety
// `points` must hold `n * dim` values and `weights`, if not null, `n`.
enum MfStatus mf_measure_new(size_t dim,
                             const double *points,
                             const double *weights,
                             size_t n,
                             struct MfMeasure **out);

// # Safety
// `m` must come from [`mf_measure_new`] and not be used afterwards.
void mf_measure_free(struct MfMeasure *m);

// Number of atoms in the measure.
//
// # Safety
// `m` must be a live handle.
enum MfStatus mf_measure_len(const struct MfMeasure *m, size_t *out);

// Order-`p` Wasserstein distance, `p` in {1, 2}, with `solver` one of
// [`MfSolver`]. `directions` and `seed` are used by the sliced solver
// only; `std_error` may be null and receives NaN for exact solvers.
//
// # Safety
// `a` and `b` must be live handles; `value` must be writable.
enum MfStatus mf_wasserstein(const struct MfMeasure *a,
                             const struct MfMeasure *b,
                             uint32_t p,
                             uint32_t solver,
                             size_t directions,
                             uint64_t seed,
                             double *value,
                             double *std_error);

// Fits `log d = log C - alpha log N` to `len` pairs.
//
// # Safety
// `counts` and `distances` must hold `len` values; `out` must be writable.
enum MfStatus mf_fit_rate(const double *counts,
                          const double *distances,
                          size_t len,
                          struct MfRateFit *out);

// Parses and validates a TOML experiment config. A relative `output_dir`
// is taken relative to the working directory.
//
// # Safety
// `toml` must be a nul-terminated string; `out` must be writable.
enum MfStatus mf_experiment_from_toml(const char *toml, struct MfExperiment **out);

// Replaces the output directory of a parsed experiment.
//
// # Safety
// `e` must be a live handle and `dir` a nul-terminated string.
enum MfStatus mf_experiment_set_output_dir(struct MfExperiment *e, const char *dir);

// Runs the experiment and hands back its summary as a JSON string, to be
// released with [`mf_string_free`]. `summary` may be null.
//
// # Safety
// `e` must be a live handle.
enum MfStatus mf_experiment_run(const struct MfExperiment *e, char **summary);

// # Safety
// `e` must come from [`mf_experiment_from_toml`] and not be used afterwards.
void mf_experiment_free(struct MfExperiment *e);

// # Safety
// `s` must be a string returned by this library.
void mf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MEANFIELD_H */
