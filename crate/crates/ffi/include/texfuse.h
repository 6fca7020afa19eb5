#ifndef TEXFUSE_H
#define TEXFUSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TfStatus {
  TF_STATUS_OK = 0,
  TF_STATUS_NULL_POINTER = 1,
  TF_STATUS_INVALID_ARGUMENT = 2,
  TF_STATUS_IO = 3,
  TF_STATUS_INVALID_MESH = 4,
  TF_STATUS_DIMENSION_MISMATCH = 5,
  TF_STATUS_BUFFER_TOO_SMALL = 6,
  TF_STATUS_INTERNAL = 7,
} TfStatus;

/**
 * Opaque mesh handle.
 */
typedef struct TfMesh TfMesh;

/**
 * Opaque texture handle.
 */
typedef struct TfTexture TfTexture;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * NUL-terminated library version; static storage.
 */
const char *tf_version(void);

/**
 * Copies the calling thread's last error message into `buf`. Returns
 * `BufferTooSmall` (and sets `required`) when it does not fit.
 *
 * # Safety
 * `buf` must be writable for `len` bytes; `required` may be null.
 */
enum TfStatus tf_last_error(char *buf, size_t len, size_t *required);

/**
 * Builds a procedural test mesh: `kind` is `uv_sphere`, `cube` or `capsule`.
 *
 * # Safety
 * `kind` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TfStatus tf_mesh_generate(const char *kind, size_t subdivision, struct TfMesh **out);

/**
 * Loads a triangulated OBJ with texture coordinates.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TfStatus tf_mesh_load(const char *path, struct TfMesh **out);

/**
 * # Safety
 * `mesh` must come from this library and not be used afterwards. Null is ignored.
 */
void tf_mesh_free(struct TfMesh *mesh);

/**
 * # Safety
 * `mesh` must be a live handle.
 */
enum TfStatus tf_mesh_counts(const struct TfMesh *mesh, size_t *vertices, size_t *faces);

/**
 * Renders a named pattern (`checker`, `stripes`, `solid`) as a square texture.
 *
 * # Safety
 * `pattern` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TfStatus tf_texture_pattern(const char *pattern, size_t size, struct TfTexture **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TfStatus tf_texture_load(const char *path, struct TfTexture **out);

/**
 * # Safety
 * `texture` must come from this library and not be used afterwards. Null is ignored.
 */
void tf_texture_free(struct TfTexture *texture);

/**
 * Renders the textured mesh from the turntable camera at `azimuth` degrees
 * into `out_rgb` (`size * size * 3` bytes, white background).
 *
 * # Safety
 * Handles must be live and `out_rgb` writable for `out_len` bytes.
 */
enum TfStatus tf_render_view(const struct TfMesh *mesh,
                             const struct TfTexture *texture,
                             double azimuth,
                             size_t size,
                             uint8_t *out_rgb,
                             size_t out_len);

/**
 * Euclidean distance from each set pixel to the nearest unset one.
 *
 * # Safety
 * `mask` must be readable and `out` writable for `width * height` elements.
 */
enum TfStatus tf_distance_transform(const uint8_t *mask, size_t width, size_t height, double *out);

/**
 * PSNR in dB between two RGB images (capped for identical inputs).
 *
 * # Safety
 * `a` and `b` must be readable for `width * height * 3` bytes.
 */
enum TfStatus tf_psnr(const uint8_t *a, const uint8_t *b, size_t width, size_t height, double *out);

/**
 * Mean SSIM on luma with an 11×11 Gaussian window; both sides must be at
 * least 11 pixels.
 *
 * # Safety
 * `a` and `b` must be readable for `width * height * 3` bytes.
 */
enum TfStatus tf_ssim(const uint8_t *a, const uint8_t *b, size_t width, size_t height, double *out);

/**
 * Inpainting prompt for a turntable azimuth. Same buffer contract as
 * [`tf_last_error`].
 *
 * # Safety
 * `buf` must be writable for `len` bytes; `required` may be null.
 */
enum TfStatus tf_view_prompt(double azimuth, char *buf, size_t len, size_t *required);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TEXFUSE_H */
