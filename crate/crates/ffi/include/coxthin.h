#ifndef COXTHIN_H
#define COXTHIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CoxthinStatus {
  COXTHIN_STATUS_OK = 0,
  COXTHIN_STATUS_NULL_POINTER = 1,
  COXTHIN_STATUS_INVALID_ARGUMENT = 2,
  COXTHIN_STATUS_CONFIG = 3,
  COXTHIN_STATUS_DATA = 4,
  COXTHIN_STATUS_NON_CONVERGENCE = 5,
  COXTHIN_STATUS_NUMERICAL = 6,
  COXTHIN_STATUS_GRADCHECK_FAILED = 7,
  COXTHIN_STATUS_BUFFER_TOO_SMALL = 8,
  COXTHIN_STATUS_PANIC = 9,
} CoxthinStatus;

/**
 * Marked point patterns, one per campaign in ascending campaign order.
 */
typedef struct CoxthinPatterns CoxthinPatterns;

/**
 * A raster layer.
 */
typedef struct CoxthinRaster CoxthinRaster;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library from the same thread.
 */
const char *coxthin_last_error(void);

/**
 * Library version as a static string.
 */
const char *coxthin_version(void);

/**
 * Matérn (ν = 1) covariance at distance `d`.
 */
enum CoxthinStatus coxthin_matern_cov(double d, double sigma, double rho, double *result);

/**
 * Half-normal detection probability of `k` covariate values with scales `taus`.
 */
enum CoxthinStatus coxthin_detection_prob(const double *z,
                                          const double *taus,
                                          size_t k,
                                          double *result);

/**
 * CRPS of the empirical distribution of `n` samples against zero.
 */
enum CoxthinStatus coxthin_crps_at_zero(const double *samples, size_t n, double *result);

/**
 * Joint PC-prior log density of (σ, ρ) calibrated by
 * P(ρ < rho0) = alpha_rho and P(σ > sigma0) = alpha_sigma.
 */
enum CoxthinStatus coxthin_pc_prior_logdensity(double sigma,
                                               double rho,
                                               double rho0,
                                               double alpha_rho,
                                               double sigma0,
                                               double alpha_sigma,
                                               double *result);

/**
 * Loads an ESRI ASCII grid.
 */
enum CoxthinStatus coxthin_raster_load(const char *path, struct CoxthinRaster **raster);

/**
 * A raster from `n_cols * n_rows` values in row-major order, row 0 at
 * the bottom (south). NaN marks nodata.
 */
enum CoxthinStatus coxthin_raster_new(double origin_x,
                                      double origin_y,
                                      size_t n_cols,
                                      size_t n_rows,
                                      double cell_size,
                                      const double *values,
                                      struct CoxthinRaster **raster);

/**
 * Grid dimensions of a raster.
 */
enum CoxthinStatus coxthin_raster_dims(const struct CoxthinRaster *raster,
                                       size_t *n_cols,
                                       size_t *n_rows);

/**
 * Copies the cell values (NaN for nodata) into `buf` of length `len`.
 */
enum CoxthinStatus coxthin_raster_values(const struct CoxthinRaster *raster,
                                         double *buf,
                                         size_t len);

void coxthin_raster_free(struct CoxthinRaster *raster);

/**
 * Loads a point-pattern CSV (`campaign,x,y,confidence,diag`).
 */
enum CoxthinStatus coxthin_patterns_load(const char *path, struct CoxthinPatterns **patterns);

enum CoxthinStatus coxthin_patterns_count(const struct CoxthinPatterns *patterns,
                                          size_t *n_campaigns);

/**
 * Campaign label and point count of the pattern at `index` (0-based).
 */
enum CoxthinStatus coxthin_patterns_campaign(const struct CoxthinPatterns *patterns,
                                             size_t index,
                                             uint32_t *campaign_id,
                                             size_t *n_points);

/**
 * Local frequency (points within `radius`, itself included) of each point of the
 * pattern at `index`, written to `buf` of length `len`.
 */
enum CoxthinStatus coxthin_local_frequency(const struct CoxthinPatterns *patterns,
                                           size_t index,
                                           double radius,
                                           double *buf,
                                           size_t len);

void coxthin_patterns_free(struct CoxthinPatterns *patterns);

/**
 * Runs a CLI command (`simulate`, `fit`, `compare` or `gradcheck`) on a
 * configuration file. `model` and `out_dir` may be null; `seed` overrides
 * the configured seed when `use_seed` is nonzero.
 */
enum CoxthinStatus coxthin_run(const char *command,
                               const char *config_path,
                               const char *model,
                               const char *out_dir,
                               int use_seed,
                               uint64_t seed,
                               int no_timestamp);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COXTHIN_H */
