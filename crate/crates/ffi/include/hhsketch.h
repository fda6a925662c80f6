#ifndef HHSKETCH_H
#define HHSKETCH_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Sketch kind selected at construction.
 */
typedef enum HhAlgorithm {
  HH_ALGORITHM_ELASTIC_HH = 0,
  HH_ALGORITHM_ELASTIC = 1,
  HH_ALGORITHM_SPACE_SAVING = 2,
  HH_ALGORITHM_CM_HEAP = 3,
  HH_ALGORITHM_COUNT_HEAP = 4,
} HhAlgorithm;

/**
 * Result code of every fallible call.
 */
typedef enum HhStatus {
  HH_STATUS_OK = 0,
  HH_STATUS_NULL_POINTER = 1,
  HH_STATUS_INVALID_ARGUMENT = 2,
  HH_STATUS_MEMORY_TOO_SMALL = 3,
  HH_STATUS_BUFFER_TOO_SMALL = 4,
  HH_STATUS_PANIC = 5,
} HhStatus;

/**
 * Opaque sketch handle.
 */
typedef struct HhSketch HhSketch;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a sketch using `memory_bytes` of accounted memory.
 *
 * `lambda_num / lambda_den` sets the eviction ratio of the two Elastic
 * variants; pass `0 / 0` for the algorithm default. The other algorithms
 * require `0 / 0`. On success `*out` receives a handle owned by the caller.
 *
 * # Safety
 * `out` must be null or valid for a pointer-sized write.
 */
enum HhStatus hh_sketch_new(enum HhAlgorithm algo,
                            size_t memory_bytes,
                            uint32_t lambda_num,
                            uint32_t lambda_den,
                            uint64_t seed,
                            struct HhSketch **out);

/**
 * Releases a sketch. Null is ignored.
 *
 * # Safety
 * `sketch` must be null or a handle from [`hh_sketch_new`] not yet freed.
 */
void hh_sketch_free(struct HhSketch *sketch);

/**
 * Feeds one packet of flow `key`.
 *
 * # Safety
 * `sketch` must be null or a live handle with no concurrent use.
 */
enum HhStatus hh_sketch_insert(struct HhSketch *sketch, uint32_t key);

/**
 * Feeds `len` packets in order.
 *
 * # Safety
 * `sketch` must be null or a live handle with no concurrent use, and `keys`
 * must be valid for `len` reads (it may be null when `len` is 0).
 */
enum HhStatus hh_sketch_insert_batch(struct HhSketch *sketch, const uint32_t *keys, size_t len);

/**
 * Writes the estimated size of flow `key` to `*out`.
 *
 * # Safety
 * `sketch` must be null or a live handle; `out` must be null or writable.
 */
enum HhStatus hh_sketch_query(const struct HhSketch *sketch, uint32_t key, uint64_t *out);

/**
 * Reports every flow whose estimate reaches `threshold`.
 *
 * `*out_len` always receives the number of reported flows. When that
 * exceeds `capacity` nothing is copied and `HH_STATUS_BUFFER_TOO_SMALL` is
 * returned, so a call with `capacity = 0` sizes the buffers. Flows come
 * out in the sketch's report order.
 *
 * # Safety
 * `sketch` must be null or a live handle; `out_len` must be writable;
 * `keys` and `estimates` must each be valid for `capacity` writes (they may
 * be null when `capacity` is 0).
 */
enum HhStatus hh_sketch_report(const struct HhSketch *sketch,
                               uint64_t threshold,
                               uint32_t *keys,
                               uint64_t *estimates,
                               size_t capacity,
                               size_t *out_len);

/**
 * Static, NUL-terminated description of `status`.
 */
const char *hh_status_message(enum HhStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HHSKETCH_H */
