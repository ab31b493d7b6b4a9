#ifndef SPECFORGE_H
#define SPECFORGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum SfStatus {
  SF_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  SF_STATUS_NULL_ARGUMENT = 1,
  SF_STATUS_VALIDATION = 2,
  SF_STATUS_FORMAT = 3,
  SF_STATUS_IO = 4,
  SF_STATUS_CODEC = 5,
  /**
   * A path was not valid UTF-8.
   */
  SF_STATUS_INVALID_UTF8 = 6,
  /**
   * An internal panic was caught.
   */
  SF_STATUS_PANIC = 7,
} SfStatus;

typedef enum SfPadding {
  SF_PADDING_REFLECT = 0,
  SF_PADDING_CIRCULAR = 1,
} SfPadding;

typedef struct SfCube SfCube;

typedef struct SfPsf SfPsf;

typedef struct SfRgb SfRgb;

typedef struct SfSrf SfSrf;

typedef struct SfChromaticParams {
  double sigma0;
  double sigma_slope;
  double shift_slope;
  double ref_lambda;
} SfChromaticParams;

typedef struct SfGratingParams {
  double eta;
  double disp_slope;
  double ref_lambda;
} SfGratingParams;

typedef struct SfRotationParams {
  double sigma_major;
  double sigma_minor;
  double angle_span;
} SfRotationParams;

/**
 * Clipping statistics of a generated metamer. `rgb_psnr_vs_source` is
 * `+inf` when `exact` is true.
 */
typedef struct SfMetamerInfo {
  double alpha;
  size_t clipped_pixel_count;
  bool exact;
  double rgb_psnr_vs_source;
  double max_abs_rgb_diff;
} SfMetamerInfo;

typedef struct SfMetricReport {
  double mrae;
  double rmse;
  double psnr_db;
  double sam_rad;
  double l1;
  size_t pixels_excluded_sam;
  size_t denom_floored_mrae;
} SfMetricReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next `sf_*` call on the same thread.
 */
const char *sf_last_error_message(void);

/**
 * Library version and container formats, as a static string.
 */
const char *sf_version(void);

/**
 * Builds a cube from `k` wavelengths and `h * w * k` band-major values.
 */
enum SfStatus sf_cube_new(size_t height,
                          size_t width,
                          size_t bands,
                          const double *wavelengths,
                          const double *data,
                          struct SfCube **out);

enum SfStatus sf_cube_read(const char *path, struct SfCube **out);

enum SfStatus sf_cube_write(const struct SfCube *cube, const char *path);

void sf_cube_free(struct SfCube *cube);

/**
 * Any of the output pointers may be NULL.
 */
enum SfStatus sf_cube_dims(const struct SfCube *cube, size_t *height, size_t *width, size_t *bands);

/**
 * Copies the band-major samples; `len` must equal `h * w * k`.
 */
enum SfStatus sf_cube_copy_data(const struct SfCube *cube, double *buf, size_t len);

enum SfStatus sf_cube_copy_wavelengths(const struct SfCube *cube, double *buf, size_t len);

/**
 * `q` holds `bands` rows of (r, g, b) sensitivities.
 */
enum SfStatus sf_srf_new(size_t bands,
                         const double *wavelengths,
                         const double *q,
                         struct SfSrf **out);

/**
 * Built-in Gaussian RGB response on the given grid.
 */
enum SfStatus sf_srf_gaussian(size_t bands, const double *wavelengths, struct SfSrf **out);

enum SfStatus sf_srf_read(const char *path, struct SfSrf **out);

void sf_srf_free(struct SfSrf *srf);

/**
 * Builds an image from `3 * h * w` channel-major values.
 */
enum SfStatus sf_rgb_new(size_t height, size_t width, const double *data, struct SfRgb **out);

enum SfStatus sf_rgb_read(const char *path, struct SfRgb **out);

/**
 * Writes a PNG at 8 or 16 bits; values must lie in `[0, 1]`.
 */
enum SfStatus sf_rgb_write(const struct SfRgb *rgb, const char *path, uint32_t bit_depth);

void sf_rgb_free(struct SfRgb *rgb);

enum SfStatus sf_rgb_dims(const struct SfRgb *rgb, size_t *height, size_t *width);

/**
 * Copies the channel-major samples; `len` must equal `3 * h * w`.
 */
enum SfStatus sf_rgb_copy_data(const struct SfRgb *rgb, double *buf, size_t len);

enum SfStatus sf_project(const struct SfCube *cube, const struct SfSrf *srf, struct SfRgb **out);

enum SfStatus sf_form_aberrated(const struct SfCube *cube,
                                const struct SfPsf *psf,
                                const struct SfSrf *srf,
                                struct SfRgb **out);

enum SfStatus sf_psf_read(const char *path, struct SfPsf **out);

enum SfStatus sf_psf_write(const struct SfPsf *psf, const char *path);

void sf_psf_free(struct SfPsf *psf);

enum SfStatus sf_psf_dims(const struct SfPsf *psf,
                          size_t *bands,
                          size_t *kernel_height,
                          size_t *kernel_width);

/**
 * Copies all kernels back to back; `len` must equal `k * kh * kw`.
 */
enum SfStatus sf_psf_copy_kernels(const struct SfPsf *psf, double *buf, size_t len);

/**
 * Fills `params` with the library defaults.
 */
enum SfStatus sf_chromatic_defaults(struct SfChromaticParams *params);

enum SfStatus sf_psf_chromatic(size_t bands,
                               const double *wavelengths,
                               const struct SfChromaticParams *params,
                               size_t size,
                               enum SfPadding padding,
                               struct SfPsf **out);

enum SfStatus sf_psf_grating(size_t bands,
                             const double *wavelengths,
                             const struct SfGratingParams *params,
                             size_t size,
                             enum SfPadding padding,
                             struct SfPsf **out);

enum SfStatus sf_psf_rotation(size_t bands,
                              const double *wavelengths,
                              const struct SfRotationParams *params,
                              size_t size,
                              enum SfPadding padding,
                              struct SfPsf **out);

/**
 * Generates the clipped metamer `S* + alpha B`. `info` may be NULL.
 */
enum SfStatus sf_metamer_generate(const struct SfCube *cube,
                                  const struct SfSrf *srf,
                                  double alpha,
                                  struct SfCube **out,
                                  struct SfMetamerInfo *info);

/**
 * Shot noise at `npe` photon electrons full scale; `npe = 0` only clamps.
 */
enum SfStatus sf_poisson_noise(const struct SfRgb *rgb,
                               double npe,
                               uint64_t seed,
                               struct SfRgb **out);

enum SfStatus sf_quantize(const struct SfRgb *rgb, uint32_t bit_depth, struct SfRgb **out);

/**
 * All metrics for an estimate against ground truth (PSNR peak 1.0).
 */
enum SfStatus sf_evaluate(const struct SfCube *est,
                          const struct SfCube *gt,
                          struct SfMetricReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECFORGE_H */
