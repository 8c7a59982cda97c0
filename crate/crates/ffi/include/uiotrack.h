#ifndef UIOTRACK_H
#define UIOTRACK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

#define UIO_OK 0

#define UIO_ERR_INVALID_ARGUMENT 1

#define UIO_ERR_PANIC 255

/**
 * Far-end guess of the non-minimum-phase filter: all zeros.
 */
#define UIO_POLICY_ZERO 0

/**
 * Far-end guess of the non-minimum-phase filter: the previous estimate.
 */
#define UIO_POLICY_WARM_START 1

/**
 * Observer, partition and zero dynamics synthesized for one plant.
 */
typedef struct UioDesign UioDesign;

/**
 * Square discrete-time plant `x(k+1) = A x + B u`, `y = C x + D u`.
 */
typedef struct UioSystem UioSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Build a plant from row-major `A` (n×n), `B` (n×m), `C` (m×n), `D` (m×m).
 *
 * # Safety
 * Each matrix pointer must reference the stated number of doubles and
 * `out` must be a valid place to store a handle.
 */
int32_t uio_system_new(size_t n,
                       size_t m,
                       const double *a,
                       const double *b,
                       const double *c,
                       const double *d,
                       struct UioSystem **out);

/**
 * Release a plant. Null is ignored.
 *
 * # Safety
 * `sys` must come from `uio_system_new` and not be freed twice.
 */
void uio_system_free(struct UioSystem *sys);

/**
 * Finite transmission zeros, sorted. `count` receives the number of zeros
 * even when `capacity` is too small, in which case nothing is written.
 *
 * # Safety
 * `re` and `im` must each hold `capacity` doubles.
 */
int32_t uio_system_zeros(const struct UioSystem *sys,
                         double *re,
                         double *im,
                         size_t capacity,
                         size_t *count);

/**
 * Synthesize the observer and zero dynamics with default options.
 *
 * # Safety
 * `sys` must be a live handle and `out` a valid place to store a handle.
 */
int32_t uio_design_new(const struct UioSystem *sys, struct UioDesign **out);

/**
 * Release a design. Null is ignored.
 *
 * # Safety
 * `design` must come from `uio_design_new` and not be freed twice.
 */
void uio_design_free(struct UioDesign *design);

/**
 * State order, input count, observer order `q` and the dimension of the
 * non-minimum-phase coordinates. Any output pointer may be null.
 *
 * # Safety
 * `design` must be a live handle; non-null outputs must be writable.
 */
int32_t uio_design_dims(const struct UioDesign *design,
                        size_t *n,
                        size_t *m,
                        size_t *q,
                        size_t *nmp_dim);

/**
 * Worst-case gain from input energy to the non-minimum-phase state error
 * for preview delay `n_d`.
 *
 * # Safety
 * `design` must be a live handle and `out` writable.
 */
int32_t uio_design_nmp_bound(const struct UioDesign *design, size_t n_d, double *out);

/**
 * Worst-case gain from reference-generating input energy to the output
 * tracking error for preview delay `n_d`.
 *
 * # Safety
 * `design` must be a live handle and `out` writable.
 */
int32_t uio_design_tracking_bound(const struct UioDesign *design, size_t n_d, double *out);

/**
 * Reconstruct the unknown input from `steps` output samples starting at
 * index 0, with the observer started at zero. The estimate for sample
 * `first_index + i` is written to row `i` of `u_hat`.
 *
 * # Safety
 * `y` must hold `steps * m` doubles and `u_hat` `capacity * m` doubles.
 */
int32_t uio_reconstruct(const struct UioDesign *design,
                        const double *y,
                        size_t steps,
                        size_t n_d,
                        int32_t init_policy,
                        double *u_hat,
                        size_t capacity,
                        int64_t *first_index,
                        size_t *count);

/**
 * Compute the command that makes the plant, started at rest, follow `y_d`
 * with preview delay `n_d`. Commands are written as in `uio_reconstruct`.
 *
 * # Safety
 * `y_d` must hold `steps * m` doubles and `u` `capacity * m` doubles.
 */
int32_t uio_track(const struct UioDesign *design,
                  const double *y_d,
                  size_t steps,
                  size_t n_d,
                  int32_t init_policy,
                  double *u,
                  size_t capacity,
                  int64_t *first_index,
                  size_t *count);

/**
 * Copy the last error message of this thread into `buf` as a NUL-terminated
 * string, truncating if needed. Returns the full message length without
 * the terminator. An empty message means the last call succeeded.
 *
 * # Safety
 * `buf` must hold `len` bytes, or be null with `len` zero.
 */
size_t uio_last_error_message(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UIOTRACK_H */
