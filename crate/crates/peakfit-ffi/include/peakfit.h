/* peakfit C API: truncated power-law tail fitting for peak-load series. */

#ifndef PEAKFIT_H
#define PEAKFIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a peakfit call.
 */
typedef enum PeakfitStatus {
  PEAKFIT_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  PEAKFIT_STATUS_NULL_POINTER = 1,
  /**
   * An argument failed validation (see the last error message).
   */
  PEAKFIT_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Not enough data for the requested operation.
   */
  PEAKFIT_STATUS_INSUFFICIENT_DATA = 3,
  /**
   * The tail was too degenerate to fit.
   */
  PEAKFIT_STATUS_DEGENERATE_TAIL = 4,
  /**
   * Query below the fitted threshold; use the empirical CCDF.
   */
  PEAKFIT_STATUS_BELOW_TAIL = 5,
  /**
   * Bootstrap resampling was too unstable to report.
   */
  PEAKFIT_STATUS_UNSTABLE = 6,
  /**
   * Unexpected internal failure.
   */
  PEAKFIT_STATUS_INTERNAL_ERROR = 7,
} PeakfitStatus;

/**
 * A fitted truncated power-law tail.
 */
typedef struct PeakfitFit PeakfitFit;

/**
 * An owned, validated peak series.
 */
typedef struct PeakfitSeries PeakfitSeries;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *peakfit_version(void);

/**
 * Copy the last error message for this thread into `buf` (truncated to
 * `cap - 1` bytes, always NUL-terminated when `cap > 0`). Returns the
 * full message length in bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must point to at least `cap` writable bytes, or be null with
 * `cap == 0` to query the length alone.
 */
uintptr_t peakfit_last_error_message(char *buf, uintptr_t cap);

/**
 * Build a series from `len` strictly positive finite values.
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` must be a valid
 * destination for one pointer.
 */
enum PeakfitStatus peakfit_series_create(const double *values,
                                         uintptr_t len,
                                         struct PeakfitSeries **out);

/**
 * # Safety
 * `series` must be null or a pointer from `peakfit_series_create` that
 * has not been freed.
 */
void peakfit_series_free(struct PeakfitSeries *series);

/**
 * Number of observations; 0 for null.
 *
 * # Safety
 * `series` must be null or a live series handle.
 */
uintptr_t peakfit_series_len(const struct PeakfitSeries *series);

/**
 * Empirical survival probability at `x` (fraction of observations at
 * or above `x`) — the fallback for queries below a fitted threshold.
 *
 * # Safety
 * `series` must be a live series handle; `out` must be writable.
 */
enum PeakfitStatus peakfit_series_survival(const struct PeakfitSeries *series,
                                           double x,
                                           double *out);

/**
 * Fit the truncated power-law tail by scanning thresholds and
 * minimizing the KS distance. `min_tail` is the smallest admissible
 * tail size (at least 10).
 *
 * # Safety
 * `series` must be a live series handle; `out` must be a valid
 * destination for one pointer.
 */
enum PeakfitStatus peakfit_fit(const struct PeakfitSeries *series,
                               uintptr_t min_tail,
                               struct PeakfitFit **out);

/**
 * # Safety
 * `fit` must be null or a pointer from `peakfit_fit` not yet freed.
 */
void peakfit_fit_free(struct PeakfitFit *fit);

/**
 * Model exceedance probability at `x >= x_min`.
 *
 * # Safety
 * `fit` must be a live fit handle; `out` must be writable.
 */
enum PeakfitStatus peakfit_fit_tail_ccdf(const struct PeakfitFit *fit, double x, double *out);

/**
 * Model tail density at `x >= x_min`.
 *
 * # Safety
 * `fit` must be a live fit handle; `out` must be writable.
 */
enum PeakfitStatus peakfit_fit_tail_pdf(const struct PeakfitFit *fit, double x, double *out);

/**
 * Monte Carlo goodness-of-fit p-value for a fit produced from this
 * series with the same `min_tail`. Deterministic given `seed`. Writes
 * the p-value and whether the null is rejected at `significance`.
 *
 * # Safety
 * `series` and `fit` must be live handles; `out_p_value` and
 * `out_reject` must be writable.
 */
enum PeakfitStatus peakfit_gof(const struct PeakfitSeries *series,
                               const struct PeakfitFit *fit,
                               uintptr_t min_tail,
                               uintptr_t replicates,
                               double significance,
                               uint64_t seed,
                               double *out_p_value,
                               int32_t *out_reject);

/**
 * Bootstrap percentile confidence intervals for the threshold and the
 * scaling parameter. Deterministic given `seed`.
 *
 * # Safety
 * `series` must be a live handle; the four interval outputs must be
 * writable.
 */
enum PeakfitStatus peakfit_bootstrap_intervals(const struct PeakfitSeries *series,
                                               uintptr_t min_tail,
                                               uintptr_t replicates,
                                               double level,
                                               uint64_t seed,
                                               double *out_x_min_low,
                                               double *out_x_min_high,
                                               double *out_alpha_low,
                                               double *out_alpha_high);

/**
 * Fill `out` with `count` power-law tail variates (inverse transform,
 * deterministic given `seed`); every variate is at least `x_min`.
 *
 * # Safety
 * `out` must point to `count` writable doubles.
 */
enum PeakfitStatus peakfit_sample_tail(double x_min,
                                       double alpha,
                                       uintptr_t count,
                                       uint64_t seed,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PEAKFIT_H */
