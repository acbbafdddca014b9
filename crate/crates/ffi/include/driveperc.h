#ifndef DRIVEPERC_H
#define DRIVEPERC_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DpStatus {
  DP_STATUS_OK = 0,
  DP_STATUS_NULL_POINTER = 1,
  DP_STATUS_INVALID_ARGUMENT = 2,
  DP_STATUS_DIMENSION = 3,
  DP_STATUS_FORMAT = 4,
  DP_STATUS_IO = 5,
  DP_STATUS_UNSUPPORTED = 6,
  DP_STATUS_PANIC = 7,
} DpStatus;

/**
 * An 8-bit RGB or grayscale image.
 */
typedef struct DpImage DpImage;

/**
 * A trained model loaded from a checkpoint.
 */
typedef struct DpModel DpModel;

/**
 * Lane pipeline parameters.
 */
typedef struct DpPipelineConfig DpPipelineConfig;

/**
 * One lane segment from the bottom row upwards.
 */
typedef struct DpSegment {
  double x1;
  double y1;
  double x2;
  double y2;
} DpSegment;

/**
 * Detected lanes; `has_left`/`has_right` are 0 when a side is absent.
 */
typedef struct DpLanes {
  uint8_t has_left;
  struct DpSegment left;
  uint8_t has_right;
  struct DpSegment right;
} DpLanes;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *dp_version(void);

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len − 1` bytes). Returns the full message length excluding
 * the NUL, or 0 when there is no message.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be NULL with `len == 0`.
 */
size_t dp_last_error_message(char *buf, size_t len);

/**
 * Read a PPM/PGM/PNG image.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum DpStatus dp_image_read(const char *path, struct DpImage **out);

/**
 * Wrap `width × height` interleaved RGB bytes (`len == width·height·3`).
 *
 * # Safety
 * `pixels` must point to `len` readable bytes; `out` a valid pointer.
 */
enum DpStatus dp_image_from_rgb(size_t width,
                                size_t height,
                                const uint8_t *pixels,
                                size_t len,
                                struct DpImage **out);

/**
 * Write an image as PPM (RGB) or PGM (gray).
 *
 * # Safety
 * `image` must come from this library; `path` must be NUL-terminated.
 */
enum DpStatus dp_image_write(const struct DpImage *image, const char *path);

/**
 * Width, height and channel count (1 or 3).
 *
 * # Safety
 * `image` must come from this library; output pointers may be NULL.
 */
enum DpStatus dp_image_dims(const struct DpImage *image,
                            size_t *width,
                            size_t *height,
                            size_t *channels);

/**
 * Copy the interleaved pixel bytes into `buf`, which must hold exactly
 * `width·height·channels` bytes.
 *
 * # Safety
 * `image` must come from this library; `buf` must point to `len` bytes.
 */
enum DpStatus dp_image_pixels(const struct DpImage *image, uint8_t *buf, size_t len);

/**
 * # Safety
 * `image` must come from this library (or be NULL) and not be used again.
 */
void dp_image_free(struct DpImage *image);

/**
 * Default lane pipeline parameters.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum DpStatus dp_pipeline_config_new(struct DpPipelineConfig **out);

/**
 * Parameters from the body of a `[pipeline]` TOML table; unset keys keep
 * their defaults and unknown keys are rejected.
 *
 * # Safety
 * `toml` must be NUL-terminated; `out` a valid pointer.
 */
enum DpStatus dp_pipeline_config_from_toml(const char *toml, struct DpPipelineConfig **out);

/**
 * # Safety
 * `config` must come from this library (or be NULL) and not be used again.
 */
void dp_pipeline_config_free(struct DpPipelineConfig *config);

/**
 * Run the lane pipeline on an RGB image. `config` may be NULL for the
 * defaults; `overlay`, when not NULL, receives a new annotated image.
 *
 * # Safety
 * Handles must come from this library; `lanes` must be a valid pointer.
 */
enum DpStatus dp_detect_lanes(const struct DpImage *image,
                              const struct DpPipelineConfig *config,
                              struct DpLanes *lanes,
                              struct DpImage **overlay);

/**
 * Load an `NNW1` checkpoint.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` a valid pointer.
 */
enum DpStatus dp_model_load(const char *path, struct DpModel **out);

/**
 * Per-sample input and output element counts.
 *
 * # Safety
 * `model` must come from this library; output pointers may be NULL.
 */
enum DpStatus dp_model_sizes(const struct DpModel *model, size_t *input_len, size_t *output_len);

/**
 * Inference on `batch` samples laid out contiguously (channels first).
 * `input_len` and `output_len` are total element counts and must equal
 * `batch` times the per-sample sizes.
 *
 * # Safety
 * `input` must point to `input_len` doubles, `output` to `output_len`.
 */
enum DpStatus dp_model_predict(const struct DpModel *model,
                               size_t batch,
                               const double *input,
                               size_t input_len,
                               double *output,
                               size_t output_len);

/**
 * # Safety
 * `model` must come from this library (or be NULL) and not be used again.
 */
void dp_model_free(struct DpModel *model);

/**
 * Area under the ROC curve; `labels` are 0/1.
 *
 * # Safety
 * `scores` and `labels` must point to `n` elements; `auc` a valid pointer.
 */
enum DpStatus dp_roc_auc(const double *scores, const uint8_t *labels, size_t n, double *auc);

/**
 * Root mean squared error of `n` predictions.
 *
 * # Safety
 * `y_true` and `y_pred` must point to `n` doubles; `out` a valid pointer.
 */
enum DpStatus dp_rmse(const double *y_true, const double *y_pred, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DRIVEPERC_H */
