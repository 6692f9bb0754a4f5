#ifndef FIELDINV_H
#define FIELDINV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum FiStatus {
  FI_STATUS_OK = 0,
  FI_STATUS_NULL_POINTER = 1,
  FI_STATUS_INVALID_ARGUMENT = 2,
  FI_STATUS_SOLVER_FAILURE = 3,
  FI_STATUS_IO = 4,
  FI_STATUS_PANIC = 5,
} FiStatus;

/**
 * Experiment configuration.
 */
typedef struct FiConfig FiConfig;

/**
 * Results of a finished experiment.
 */
typedef struct FiOutcome FiOutcome;

/**
 * Poisson coefficient posterior on the unit square with the default
 * bi-Laplacian prior.
 */
typedef struct FiPosterior FiPosterior;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length plus
 * one, or 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t fi_last_error(char *buf, size_t len);

/**
 * Configuration with every default filled in.
 */
struct FiConfig *fi_config_default(void);

/**
 * Parses a `section.key = value` document.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FiStatus fi_config_parse(const char *text, struct FiConfig **out);

/**
 * # Safety
 * `cfg` must come from this library and not be used afterwards.
 */
void fi_config_free(struct FiConfig *cfg);

/**
 * Sets the output directory.
 *
 * # Safety
 * `cfg` must be a live handle and `dir` a NUL-terminated string.
 */
enum FiStatus fi_config_set_output(struct FiConfig *cfg, const char *dir);

/**
 * Selects the sampling method by name, e.g. `"h-pcn"`.
 *
 * # Safety
 * `cfg` must be a live handle and `name` a NUL-terminated string.
 */
enum FiStatus fi_config_set_method(struct FiConfig *cfg, const char *name);

/**
 * Chain count, samples per chain and base seed.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum FiStatus fi_config_set_chains(struct FiConfig *cfg,
                                   size_t chains,
                                   size_t samples,
                                   uint64_t seed);

/**
 * Runs the full experiment, writing artifacts to the output directory.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum FiStatus fi_run(const struct FiConfig *cfg, struct FiOutcome **out);

/**
 * # Safety
 * `res` must come from [`fi_run`] and not be used afterwards.
 */
void fi_outcome_free(struct FiOutcome *res);

/**
 * MPSRF of the run; NaN for a null handle.
 *
 * # Safety
 * `res` must be null or a live handle.
 */
double fi_outcome_mpsrf(const struct FiOutcome *res);

/**
 * Average ESS over the projected coordinates; NaN for a null handle.
 *
 * # Safety
 * `res` must be null or a live handle.
 */
double fi_outcome_ess_avg(const struct FiOutcome *res);

/**
 * PDE solves per effective sample; NaN for a null handle.
 *
 * # Safety
 * `res` must be null or a live handle.
 */
double fi_outcome_nps_per_es(const struct FiOutcome *res);

/**
 * Acceptance rate of `stage` (0-based), averaged over chains.
 *
 * # Safety
 * `res` must be a live handle and `out` a valid pointer.
 */
enum FiStatus fi_outcome_acceptance(const struct FiOutcome *res, size_t stage, double *out);

/**
 * The `key = value` report; owned by the handle.
 *
 * # Safety
 * `res` must be null or a live handle.
 */
const char *fi_outcome_report(const struct FiOutcome *res);

/**
 * Posterior with `n` cells per side, `l` observation points given as
 * interleaved `(x, y)` pairs in `points`, noise level `sigma` and data.
 *
 * # Safety
 * `points` must hold `2 l` values, `data` `l` values, `out` must be valid.
 */
enum FiStatus fi_posterior_new(size_t n,
                               const double *points,
                               const double *data,
                               size_t l,
                               double sigma,
                               struct FiPosterior **out);

/**
 * # Safety
 * `post` must come from [`fi_posterior_new`] and not be used afterwards.
 */
void fi_posterior_free(struct FiPosterior *post);

/**
 * Parameter dimension (mesh vertex count); 0 for a null handle.
 *
 * # Safety
 * `post` must be null or a live handle.
 */
size_t fi_posterior_dim(const struct FiPosterior *post);

/**
 * Unnormalized log posterior at `m`.
 *
 * # Safety
 * `m` must hold `len` values and `out` must be valid.
 */
enum FiStatus fi_posterior_log_density(const struct FiPosterior *post,
                                       const double *m,
                                       size_t len,
                                       double *out);

/**
 * Gradient of the log posterior at `m`, written to `grad` (`len` values).
 *
 * # Safety
 * `m` and `grad` must each hold `len` values.
 */
enum FiStatus fi_posterior_gradient(const struct FiPosterior *post,
                                    const double *m,
                                    size_t len,
                                    double *grad);

/**
 * Log boundary flux at `m`.
 *
 * # Safety
 * `m` must hold `len` values and `out` must be valid.
 */
enum FiStatus fi_posterior_qoi(const struct FiPosterior *post,
                               const double *m,
                               size_t len,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FIELDINV_H */
