#ifndef ATTBUS_H
#define ATTBUS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AttbusStatus {
  ATTBUS_STATUS_OK = 0,
  ATTBUS_STATUS_NULL_POINTER = 1,
  ATTBUS_STATUS_INVALID_ARGUMENT = 2,
  ATTBUS_STATUS_WIRE_ERROR = 3,
  ATTBUS_STATUS_BUFFER_TOO_SMALL = 4,
  ATTBUS_STATUS_NOT_INITIALIZED = 5,
  ATTBUS_STATUS_COMPUTE_ERROR = 6,
  ATTBUS_STATUS_PANIC = 7,
} AttbusStatus;

typedef struct AttbusAttention AttbusAttention;

typedef struct AttbusSelector AttbusSelector;

typedef struct AttbusTracker AttbusTracker;

/**
 * Borrowed 8-bit image, row-major, `channels` interleaved (1 or 3).
 */
typedef struct AttbusImage {
  uint32_t width;
  uint32_t height;
  uint8_t channels;
  const uint8_t *pixels;
} AttbusImage;

/**
 * Header fields of a decoded frame.
 */
typedef struct AttbusFrameInfo {
  uint16_t type_id;
  uint32_t seq;
  uint64_t stamp_ns;
  uint32_t width;
  uint32_t height;
  uint8_t channels;
} AttbusFrameInfo;

typedef struct AttbusBox {
  uint32_t x;
  uint32_t y;
  uint32_t w;
  uint32_t h;
} AttbusBox;

typedef struct AttbusPoint {
  uint32_t x;
  uint32_t y;
  float score;
} AttbusPoint;

/**
 * `state`: 0 idle, 1 tracking, 2 lost.
 */
typedef struct AttbusTrack {
  uint8_t state;
  struct AttbusBox bbox;
  float confidence;
} AttbusTrack;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *attbus_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL,
 * 0 when there is no error.
 *
 * # Safety
 * `buf` must be writable for `len` bytes or be null.
 */
size_t attbus_last_error(char *buf, size_t len);

/**
 * Serializes an image onto `topic` as a wire frame. `out_len` receives the
 * frame size; with `BufferTooSmall` it tells the caller how much to allocate.
 *
 * # Safety
 * Pointers must be valid; `out` writable for `out_cap` bytes (may be null
 * when `out_cap` is 0).
 */
enum AttbusStatus attbus_encode_image(const char *topic,
                                      uint32_t seq,
                                      uint64_t stamp_ns,
                                      const struct AttbusImage *img,
                                      uint8_t *out,
                                      size_t out_cap,
                                      size_t *out_len);

/**
 * Parses a wire frame. Image frames report their geometry and copy
 * pixels into `pixels` when it is non-null and large enough.
 *
 * # Safety
 * `bytes` must be readable for `len` bytes; `pixels` writable for
 * `pixels_cap` bytes or null.
 */
enum AttbusStatus attbus_decode_frame(const uint8_t *bytes,
                                      size_t len,
                                      struct AttbusFrameInfo *info,
                                      uint8_t *pixels,
                                      size_t pixels_cap);

/**
 * `model` is `"itti"` or `"spectral"`; `channels` (itti only, may be
 * null) selects feature channels, e.g. `"icom"`.
 *
 * # Safety
 * Strings must be NUL-terminated; `out` must be writable.
 */
enum AttbusStatus attbus_attention_new(const char *model,
                                       const char *channels,
                                       struct AttbusAttention **out);

/**
 * # Safety
 * `h` must come from [`attbus_attention_new`] and not be used afterwards.
 */
void attbus_attention_free(struct AttbusAttention *h);

/**
 * Computes the saliency map of `img`; its size is written to `out_w`/`out_h`.
 *
 * # Safety
 * Valid handle and image; `out_w`, `out_h` writable.
 */
enum AttbusStatus attbus_attention_process(struct AttbusAttention *h,
                                           const struct AttbusImage *img,
                                           uint32_t *out_w,
                                           uint32_t *out_h);

/**
 * Copies the last saliency map (row-major, values in [0, 1]).
 *
 * # Safety
 * Valid handle; `out` writable for `cap` floats.
 */
enum AttbusStatus attbus_attention_saliency(const struct AttbusAttention *h,
                                            float *out,
                                            size_t cap);

/**
 * Suppresses `bbox` (source pixels) for the next `decay_frames` frames.
 *
 * # Safety
 * Valid handle.
 */
enum AttbusStatus attbus_attention_inhibit(struct AttbusAttention *h,
                                           struct AttbusBox bbox,
                                           uint32_t decay_frames);

/**
 * `ior_radius` 0 disables inhibition of return.
 *
 * # Safety
 * `out` must be writable.
 */
enum AttbusStatus attbus_selector_new(double ior_radius,
                                      float ior_decay,
                                      struct AttbusSelector **out);

/**
 * # Safety
 * `h` must come from [`attbus_selector_new`] and not be used afterwards.
 */
void attbus_selector_free(struct AttbusSelector *h);

/**
 * Picks the next focus of attention on a `map_w` x `map_h` saliency map
 * computed from a `src_w` x `src_h` image. The point is in source pixels.
 *
 * # Safety
 * Valid handle; `values` readable for `map_w * map_h` floats; `out` writable.
 */
enum AttbusStatus attbus_selector_select(struct AttbusSelector *h,
                                         const float *values,
                                         uint32_t map_w,
                                         uint32_t map_h,
                                         uint32_t src_w,
                                         uint32_t src_h,
                                         struct AttbusPoint *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum AttbusStatus attbus_tracker_new(double margin, double update_rate, struct AttbusTracker **out);

/**
 * # Safety
 * `h` must come from [`attbus_tracker_new`] and not be used afterwards.
 */
void attbus_tracker_free(struct AttbusTracker *h);

/**
 * Takes the template at `bbox` from `img`.
 *
 * # Safety
 * Valid handle and image.
 */
enum AttbusStatus attbus_tracker_init(struct AttbusTracker *h,
                                      const struct AttbusImage *img,
                                      struct AttbusBox bbox);

/**
 * Matches the template in `img`. `state` is 1 (tracking) with the raw
 * NCC score as confidence; callers decide when that means lost.
 *
 * # Safety
 * Valid handle and image; `out` writable.
 */
enum AttbusStatus attbus_tracker_step(struct AttbusTracker *h,
                                      const struct AttbusImage *img,
                                      struct AttbusTrack *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ATTBUS_H */
