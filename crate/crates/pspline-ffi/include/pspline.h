/* C interface to the pspline penalized smoothing library. */

#ifndef PSPLINE_H
#define PSPLINE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible entry point.
typedef enum PsStatus {
  PS_OK = 0,
  // a required pointer argument was null
  PS_NULL_POINTER = 1,
  // sizes or parameters violate the documented preconditions
  PS_INVALID_ARGUMENT = 2,
  // an evaluation point lies outside the valid domain
  PS_DOMAIN_ERROR = 3,
  // a numeric factorization or solve failed
  PS_NUMERIC_ERROR = 4,
  // unexpected internal failure
  PS_INTERNAL_ERROR = 5,
} PsStatus;

// Opaque boundary-corrected kernel at a fixed inverse bandwidth.
typedef struct PsBoundaryKernel PsBoundaryKernel;

// Opaque fitted P-spline.
typedef struct PsFit PsFit;

// Opaque interior equivalent kernel.
typedef struct PsKernel PsKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a NUL-terminated static string.
const char *ps_version(void);

// Fit a penalized spline to `n` observations on the equally spaced
// design `t_i = i/n`. On success `*out` owns the fit; release it with
// [`ps_fit_free`].
//
// # Safety
// `y` must point to `n` readable doubles and `out` must be a valid
// pointer.
enum PsStatus ps_fit_create(const double *y,
                            size_t n,
                            size_t num_intervals,
                            size_t degree,
                            size_t penalty_order,
                            double lambda_star,
                            struct PsFit **out);

// Evaluate the fitted curve at `x` in `[0, 1]`.
//
// # Safety
// `handle` must come from [`ps_fit_create`]; `out` must be valid.
enum PsStatus ps_fit_predict(const struct PsFit *handle, double x, double *out);

// The degree correction `gamma(t)`; exactly 0 when the spline degree
// equals the penalty order.
//
// # Safety
// `handle` must come from [`ps_fit_create`]; `out` must be valid.
enum PsStatus ps_fit_correction(const struct PsFit *handle, double t, double *out);

// Number of spline coefficients (`K_n + p`).
//
// # Safety
// `handle` must be null (returns 0) or come from [`ps_fit_create`].
size_t ps_fit_num_coeffs(const struct PsFit *handle);

// Copy the coefficient vector into `out` (length `len` must be at
// least [`ps_fit_num_coeffs`]).
//
// # Safety
// `handle` must come from [`ps_fit_create`]; `out` must point to
// `len` writable doubles.
enum PsStatus ps_fit_coeffs(const struct PsFit *handle, double *out, size_t len);

// Release a fit handle (null is a no-op).
//
// # Safety
// `handle` must be null or a pointer from [`ps_fit_create`] that has
// not been freed yet.
void ps_fit_free(struct PsFit *handle);

// Build the interior equivalent kernel of order `m` (1..=12).
//
// # Safety
// `out` must be a valid pointer.
enum PsStatus ps_kernel_create(size_t m, struct PsKernel **out);

// Kernel value `K(t, s)` at inverse bandwidth `beta`.
//
// # Safety
// `handle` must come from [`ps_kernel_create`]; `out` must be valid.
enum PsStatus ps_kernel_eval(const struct PsKernel *handle,
                             double beta,
                             double t,
                             double s,
                             double *out);

// Kernel moment of the given order at `beta = 1` (orders `1..2m-1`
// vanish for a 2m-th order kernel).
//
// # Safety
// `handle` must come from [`ps_kernel_create`]; `out` must be valid.
enum PsStatus ps_kernel_moment(const struct PsKernel *handle, size_t order, double *out);

// The variance constant `(1/beta) int_0^1 K(t, s)^2 ds`.
//
// # Safety
// `handle` must come from [`ps_kernel_create`]; `out` must be valid.
enum PsStatus ps_kernel_sigma_squared(const struct PsKernel *handle,
                                      double beta,
                                      double t,
                                      double *out);

// Release a kernel handle (null is a no-op).
//
// # Safety
// `handle` must be null or an unfreed pointer from
// [`ps_kernel_create`].
void ps_kernel_free(struct PsKernel *handle);

// Build the boundary-corrected kernel of order `m` at inverse
// bandwidth `beta >= 1`.
//
// # Safety
// `out` must be a valid pointer.
enum PsStatus ps_boundary_kernel_create(size_t m, double beta, struct PsBoundaryKernel **out);

// `K_b(t, s)` with the correction for whichever boundary is nearer.
//
// # Safety
// `handle` must come from [`ps_boundary_kernel_create`]; `out` must
// be valid.
enum PsStatus ps_boundary_kernel_eval(const struct PsBoundaryKernel *handle,
                                      double t,
                                      double s,
                                      double *out);

// The order-2 two-boundary finite-sample kernel.
//
// # Safety
// `out` must be a valid pointer.
enum PsStatus ps_finite_sample_kernel_m2(double beta, double t, double s, double *out);

// Release a boundary-kernel handle (null is a no-op).
//
// # Safety
// `handle` must be null or an unfreed pointer from
// [`ps_boundary_kernel_create`].
void ps_boundary_kernel_free(struct PsBoundaryKernel *handle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PSPLINE_H */
