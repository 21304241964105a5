#ifndef SWAMM_H
#define SWAMM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  SWAMM_STATUS_OK = 0,
  SWAMM_STATUS_NULL_POINTER = 1,
  SWAMM_STATUS_INVALID_ARGUMENT = 2,
  SWAMM_STATUS_DIMENSION_MISMATCH = 3,
  SWAMM_STATUS_NON_FINITE = 4,
  SWAMM_STATUS_NOT_NORMALIZED = 5,
  SWAMM_STATUS_NORM_OUT_OF_RANGE = 6,
  SWAMM_STATUS_BUFFER_TOO_SMALL = 7,
  SWAMM_STATUS_CORRUPT = 8,
  SWAMM_STATUS_PANIC = 9,
} swamm_status;

/**
 * Layered sketch for columns with squared norms in `[1, R]`.
 */
typedef struct swamm_layered swamm_layered;

/**
 * Sliding-window sketch for a fixed threshold.
 */
typedef struct swamm_sketch swamm_sketch;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *swamm_last_error(void);

/**
 * Normalized-model sketch: unit-norm columns, threshold `eps * n_window`.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
swamm_status swamm_sketch_new(size_t d_x,
                              size_t d_y,
                              double eps,
                              uint64_t n_window,
                              swamm_sketch **out);

/**
 * Sketch with explicit width and registration threshold; any column norms.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
swamm_status swamm_sketch_new_with_threshold(size_t d_x,
                                             size_t d_y,
                                             size_t width,
                                             uint64_t n_window,
                                             double theta,
                                             swamm_sketch **out);

/**
 * # Safety
 * `sketch` must be null or a handle from this library not yet freed.
 */
void swamm_sketch_free(swamm_sketch *sketch);

/**
 * Append one column pair. `fast` selects the incremental update.
 *
 * # Safety
 * `x` and `y` must point to `x_len` and `y_len` readable doubles.
 */
swamm_status swamm_sketch_update(swamm_sketch *sketch,
                                 const double *x,
                                 size_t x_len,
                                 const double *y,
                                 size_t y_len,
                                 bool fast);

/**
 * Number of items seen so far.
 *
 * # Safety
 * `sketch` must be a live handle and `now` valid for writing.
 */
swamm_status swamm_sketch_now(const swamm_sketch *sketch, uint64_t *now);

/**
 * Number of columns a query returns right now.
 *
 * # Safety
 * `sketch` must be a live handle and `cols` valid for writing.
 */
swamm_status swamm_sketch_query_columns(const swamm_sketch *sketch, size_t *cols);

/**
 * Write the query factors `A` (`d_x x cols`) and `B` (`d_y x cols`).
 * `cols` always receives the column count, also on `BufferTooSmall`.
 *
 * # Safety
 * `a` and `b` must be writable for `a_len` and `b_len` doubles.
 */
swamm_status swamm_sketch_query(const swamm_sketch *sketch,
                                double *a,
                                size_t a_len,
                                double *b,
                                size_t b_len,
                                size_t *cols);

/**
 * Write the `d_x x d_y` window product estimate.
 *
 * # Safety
 * `out` must be writable for `len` doubles.
 */
swamm_status swamm_sketch_product(const swamm_sketch *sketch, double *out, size_t len);

/**
 * Serialize into `out`. `written` receives the blob size; pass a null or
 * short buffer to learn it (the call then returns `BufferTooSmall`).
 *
 * # Safety
 * `out` must be writable for `len` bytes and `written` for one `size_t`.
 */
swamm_status swamm_sketch_save(const swamm_sketch *sketch,
                               uint8_t *out,
                               size_t len,
                               size_t *written);

/**
 * Restore a sketch from a blob produced by [`swamm_sketch_save`].
 *
 * # Safety
 * `data` must be readable for `len` bytes and `out` valid for a pointer write.
 */
swamm_status swamm_sketch_load(const uint8_t *data, size_t len, swamm_sketch **out);

/**
 * Layered sketch for squared column norms in `[1, r_bound]`.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
swamm_status swamm_layered_new(size_t d_x,
                               size_t d_y,
                               double eps,
                               uint64_t n_window,
                               double r_bound,
                               swamm_layered **out);

/**
 * # Safety
 * `sketch` must be null or a handle from this library not yet freed.
 */
void swamm_layered_free(swamm_layered *sketch);

/**
 * # Safety
 * `x` and `y` must point to `x_len` and `y_len` readable doubles.
 */
swamm_status swamm_layered_update(swamm_layered *sketch,
                                  const double *x,
                                  size_t x_len,
                                  const double *y,
                                  size_t y_len);

/**
 * Query factors of the answering layer; `layer` receives its index and
 * `fallback` whether no layer covered the whole window.
 *
 * # Safety
 * Output arrays must be writable for their lengths; scalar outputs may be null.
 */
swamm_status swamm_layered_query(const swamm_layered *sketch,
                                 double *a,
                                 size_t a_len,
                                 double *b,
                                 size_t b_len,
                                 size_t *cols,
                                 size_t *layer,
                                 bool *fallback);

/**
 * # Safety
 * `out` must be writable for `len` doubles.
 */
swamm_status swamm_layered_product(const swamm_layered *sketch, double *out, size_t len);

/**
 * # Safety
 * `out` must be writable for `len` bytes and `written` for one `size_t`.
 */
swamm_status swamm_layered_save(const swamm_layered *sketch,
                                uint8_t *out,
                                size_t len,
                                size_t *written);

/**
 * # Safety
 * `data` must be readable for `len` bytes and `out` valid for a pointer write.
 */
swamm_status swamm_layered_load(const uint8_t *data, size_t len, swamm_layered **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SWAMM_H */
