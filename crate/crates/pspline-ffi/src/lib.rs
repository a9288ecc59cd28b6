//! C ABI for the pspline library: opaque handles, status codes, plain
//! `double` in and out. Every function is panic-safe; errors map onto
//! [`PsStatus`] and never unwind across the boundary.
//!
//! The header `include/pspline.h` is generated by cbindgen at build
//! time and committed alongside the crate.

use pspline::boundary::{self, BoundaryError, BoundaryKernelSpec};
use pspline::fit::{self, FitError, PSplineFit};
use pspline::kernel::{self, KernelError, KernelSpec};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    PsOk = 0,
    /// a required pointer argument was null
    PsNullPointer = 1,
    /// sizes or parameters violate the documented preconditions
    PsInvalidArgument = 2,
    /// an evaluation point lies outside the valid domain
    PsDomainError = 3,
    /// a numeric factorization or solve failed
    PsNumericError = 4,
    /// unexpected internal failure
    PsInternalError = 5,
}

fn map_fit_error(err: &FitError) -> PsStatus {
    match err {
        FitError::DomainError(_) | FitError::CorrectionDomain { .. } => PsStatus::PsDomainError,
        FitError::SingularSystem { .. } => PsStatus::PsNumericError,
        _ => PsStatus::PsInvalidArgument,
    }
}

fn map_kernel_error(err: &KernelError) -> PsStatus {
    match err {
        KernelError::SolveFailure { .. } => PsStatus::PsNumericError,
        _ => PsStatus::PsInvalidArgument,
    }
}

fn map_boundary_error(err: &BoundaryError) -> PsStatus {
    match err {
        BoundaryError::Solve(_) | BoundaryError::ResidualTooLarge { .. } => {
            PsStatus::PsNumericError
        }
        BoundaryError::Kernel(e) => map_kernel_error(e),
        _ => PsStatus::PsInvalidArgument,
    }
}

fn guarded<F: FnOnce() -> PsStatus>(body: F) -> PsStatus {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or(PsStatus::PsInternalError)
}

/// Opaque fitted P-spline.
pub struct PsFit {
    inner: PSplineFit,
}

/// Opaque interior equivalent kernel.
pub struct PsKernel {
    inner: KernelSpec,
}

/// Opaque boundary-corrected kernel at a fixed inverse bandwidth.
pub struct PsBoundaryKernel {
    inner: BoundaryKernelSpec,
}

/// Library version as a NUL-terminated static string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Fit a penalized spline to `n` observations on the equally spaced
/// design `t_i = i/n`. On success `*out` owns the fit; release it with
/// [`ps_fit_free`].
///
/// # Safety
/// `y` must point to `n` readable doubles and `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_fit_create(
    y: *const f64,
    n: usize,
    num_intervals: usize,
    degree: usize,
    penalty_order: usize,
    lambda_star: f64,
    out: *mut *mut PsFit,
) -> PsStatus {
    if y.is_null() || out.is_null() {
        return PsStatus::PsNullPointer;
    }
    let data = unsafe { std::slice::from_raw_parts(y, n) }.to_vec();
    guarded(|| {
        let config = match fit::FitConfig::new(n, num_intervals, degree, penalty_order, lambda_star)
        {
            Ok(c) => c,
            Err(e) => return map_fit_error(&e),
        };
        match fit::fit(&data, &config) {
            Ok(inner) => {
                unsafe { *out = Box::into_raw(Box::new(PsFit { inner })) };
                PsStatus::PsOk
            }
            Err(e) => map_fit_error(&e),
        }
    })
}

/// Evaluate the fitted curve at `x` in `[0, 1]`.
///
/// # Safety
/// `handle` must come from [`ps_fit_create`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_fit_predict(
    handle: *const PsFit,
    x: f64,
    out: *mut f64,
) -> PsStatus {
    let Some(fit_ref) = (unsafe { handle.as_ref() }) else {
        return PsStatus::PsNullPointer;
    };
    if out.is_null() {
        return PsStatus::PsNullPointer;
    }
    guarded(|| match fit::predict(&fit_ref.inner, x) {
        Ok(v) => {
            unsafe { *out = v };
            PsStatus::PsOk
        }
        Err(e) => map_fit_error(&e),
    })
}

/// The degree correction `gamma(t)`; exactly 0 when the spline degree
/// equals the penalty order.
///
/// # Safety
/// `handle` must come from [`ps_fit_create`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_fit_correction(
    handle: *const PsFit,
    t: f64,
    out: *mut f64,
) -> PsStatus {
    let Some(fit_ref) = (unsafe { handle.as_ref() }) else {
        return PsStatus::PsNullPointer;
    };
    if out.is_null() {
        return PsStatus::PsNullPointer;
    }
    guarded(|| match fit::correction_gamma(&fit_ref.inner, t) {
        Ok(v) => {
            unsafe { *out = v };
            PsStatus::PsOk
        }
        Err(e) => map_fit_error(&e),
    })
}

/// Number of spline coefficients (`K_n + p`).
///
/// # Safety
/// `handle` must be null (returns 0) or come from [`ps_fit_create`].
#[no_mangle]
pub unsafe extern "C" fn ps_fit_num_coeffs(handle: *const PsFit) -> usize {
    unsafe { handle.as_ref() }.map_or(0, |f| f.inner.coeffs().len())
}

/// Copy the coefficient vector into `out` (length `len` must be at
/// least [`ps_fit_num_coeffs`]).
///
/// # Safety
/// `handle` must come from [`ps_fit_create`]; `out` must point to
/// `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_fit_coeffs(
    handle: *const PsFit,
    out: *mut f64,
    len: usize,
) -> PsStatus {
    let Some(fit_ref) = (unsafe { handle.as_ref() }) else {
        return PsStatus::PsNullPointer;
    };
    if out.is_null() {
        return PsStatus::PsNullPointer;
    }
    let coeffs = fit_ref.inner.coeffs();
    if len < coeffs.len() {
        return PsStatus::PsInvalidArgument;
    }
    unsafe { std::ptr::copy_nonoverlapping(coeffs.as_ptr(), out, coeffs.len()) };
    PsStatus::PsOk
}

/// Release a fit handle (null is a no-op).
///
/// # Safety
/// `handle` must be null or a pointer from [`ps_fit_create`] that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn ps_fit_free(handle: *mut PsFit) {
    if !handle.is_null() {
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Build the interior equivalent kernel of order `m` (1..=12).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_kernel_create(m: usize, out: *mut *mut PsKernel) -> PsStatus {
    if out.is_null() {
        return PsStatus::PsNullPointer;
    }
    guarded(|| match kernel::solve_kernel_coefficients(m) {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(PsKernel { inner })) };
            PsStatus::PsOk
        }
        Err(e) => map_kernel_error(&e),
    })
}

/// Kernel value `K(t, s)` at inverse bandwidth `beta`.
///
/// # Safety
/// `handle` must come from [`ps_kernel_create`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_kernel_eval(
    handle: *const PsKernel,
    beta: f64,
    t: f64,
    s: f64,
    out: *mut f64,
) -> PsStatus {
    let Some(spec) = (unsafe { handle.as_ref() }) else {
        return PsStatus::PsNullPointer;
    };
    if out.is_null() {
        return PsStatus::PsNullPointer;
    }
    if !(beta > 0.0) {
        return PsStatus::PsInvalidArgument;
    }
    unsafe { *out = kernel::eval_kernel(&spec.inner, beta, t, s) };
    PsStatus::PsOk
}

/// Kernel moment of the given order at `beta = 1` (orders `1..2m-1`
/// vanish for a 2m-th order kernel).
///
/// # Safety
/// `handle` must come from [`ps_kernel_create`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_kernel_moment(
    handle: *const PsKernel,
    order: usize,
    out: *mut f64,
) -> PsStatus {
    let Some(spec) = (unsafe { handle.as_ref() }) else {
        return PsStatus::PsNullPointer;
    };
    if out.is_null() {
        return PsStatus::PsNullPointer;
    }
    if order > 60 {
        return PsStatus::PsInvalidArgument;
    }
    guarded(|| {
        unsafe { *out = kernel::kernel_moment(&spec.inner, order) };
        PsStatus::PsOk
    })
}

/// The variance constant `(1/beta) int_0^1 K(t, s)^2 ds`.
///
/// # Safety
/// `handle` must come from [`ps_kernel_create`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_kernel_sigma_squared(
    handle: *const PsKernel,
    beta: f64,
    t: f64,
    out: *mut f64,
) -> PsStatus {
    let Some(spec) = (unsafe { handle.as_ref() }) else {
        return PsStatus::PsNullPointer;
    };
    if out.is_null() {
        return PsStatus::PsNullPointer;
    }
    guarded(|| match kernel::sigma_k_squared(&spec.inner, beta, t) {
        Ok(v) => {
            unsafe { *out = v.value };
            PsStatus::PsOk
        }
        Err(e) => map_kernel_error(&e),
    })
}

/// Release a kernel handle (null is a no-op).
///
/// # Safety
/// `handle` must be null or an unfreed pointer from
/// [`ps_kernel_create`].
#[no_mangle]
pub unsafe extern "C" fn ps_kernel_free(handle: *mut PsKernel) {
    if !handle.is_null() {
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Build the boundary-corrected kernel of order `m` at inverse
/// bandwidth `beta >= 1`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_boundary_kernel_create(
    m: usize,
    beta: f64,
    out: *mut *mut PsBoundaryKernel,
) -> PsStatus {
    if out.is_null() {
        return PsStatus::PsNullPointer;
    }
    guarded(|| match BoundaryKernelSpec::new(m, beta) {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(PsBoundaryKernel { inner })) };
            PsStatus::PsOk
        }
        Err(e) => map_boundary_error(&e),
    })
}

/// `K_b(t, s)` with the correction for whichever boundary is nearer.
///
/// # Safety
/// `handle` must come from [`ps_boundary_kernel_create`]; `out` must
/// be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_boundary_kernel_eval(
    handle: *const PsBoundaryKernel,
    t: f64,
    s: f64,
    out: *mut f64,
) -> PsStatus {
    let Some(spec) = (unsafe { handle.as_ref() }) else {
        return PsStatus::PsNullPointer;
    };
    if out.is_null() {
        return PsStatus::PsNullPointer;
    }
    unsafe { *out = spec.inner.eval(t, s) };
    PsStatus::PsOk
}

/// The order-2 two-boundary finite-sample kernel.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_finite_sample_kernel_m2(
    beta: f64,
    t: f64,
    s: f64,
    out: *mut f64,
) -> PsStatus {
    if out.is_null() {
        return PsStatus::PsNullPointer;
    }
    guarded(|| match boundary::finite_sample_kernel(2, beta, t, s) {
        Ok(v) => {
            unsafe { *out = v };
            PsStatus::PsOk
        }
        Err(e) => map_boundary_error(&e),
    })
}

/// Release a boundary-kernel handle (null is a no-op).
///
/// # Safety
/// `handle` must be null or an unfreed pointer from
/// [`ps_boundary_kernel_create`].
#[no_mangle]
pub unsafe extern "C" fn ps_boundary_kernel_free(handle: *mut PsBoundaryKernel) {
    if !handle.is_null() {
        drop(unsafe { Box::from_raw(handle) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn fit_round_trip_through_the_abi() {
        let n = 24usize;
        let y: Vec<f64> = (1..=n).map(|i| 2.0 + (i as f64 / n as f64)).collect();
        let mut handle: *mut PsFit = ptr::null_mut();
        let status = unsafe { ps_fit_create(y.as_ptr(), n, 8, 2, 2, 1.0, &mut handle) };
        assert_eq!(status, PsStatus::PsOk);
        assert_eq!(unsafe { ps_fit_num_coeffs(handle) }, 10);

        let mut value = 0.0;
        assert_eq!(unsafe { ps_fit_predict(handle, 0.5, &mut value) }, PsStatus::PsOk);
        assert!((value - 2.5).abs() < 1e-3, "{value}");
        assert_eq!(
            unsafe { ps_fit_predict(handle, 1.5, &mut value) },
            PsStatus::PsDomainError
        );

        let mut gamma = f64::NAN;
        assert_eq!(unsafe { ps_fit_correction(handle, 0.43, &mut gamma) }, PsStatus::PsOk);
        assert_eq!(gamma, 0.0); // p == m

        let mut coeffs = vec![0.0; 10];
        assert_eq!(
            unsafe { ps_fit_coeffs(handle, coeffs.as_mut_ptr(), coeffs.len()) },
            PsStatus::PsOk
        );
        assert!(coeffs.iter().all(|c| c.is_finite()));
        assert_eq!(
            unsafe { ps_fit_coeffs(handle, coeffs.as_mut_ptr(), 3) },
            PsStatus::PsInvalidArgument
        );
        unsafe { ps_fit_free(handle) };
    }

    #[test]
    fn invalid_configuration_is_reported() {
        let y = vec![1.0; 10];
        let mut handle: *mut PsFit = ptr::null_mut();
        // 10 % 3 != 0
        let status = unsafe { ps_fit_create(y.as_ptr(), 10, 3, 2, 2, 1.0, &mut handle) };
        assert_eq!(status, PsStatus::PsInvalidArgument);
        assert!(handle.is_null());
        let status = unsafe { ps_fit_create(ptr::null(), 10, 5, 2, 2, 1.0, &mut handle) };
        assert_eq!(status, PsStatus::PsNullPointer);
    }

    #[test]
    fn kernel_handles() {
        let mut handle: *mut PsKernel = ptr::null_mut();
        assert_eq!(unsafe { ps_kernel_create(1, &mut handle) }, PsStatus::PsOk);
        let mut v = 0.0;
        assert_eq!(unsafe { ps_kernel_eval(handle, 1.0, 0.3, 0.3, &mut v) }, PsStatus::PsOk);
        assert!((v - 0.5).abs() < 1e-15);
        assert_eq!(
            unsafe { ps_kernel_eval(handle, -1.0, 0.3, 0.3, &mut v) },
            PsStatus::PsInvalidArgument
        );
        assert_eq!(unsafe { ps_kernel_moment(handle, 0, &mut v) }, PsStatus::PsOk);
        assert!((v - 1.0).abs() < 1e-8);
        assert_eq!(
            unsafe { ps_kernel_moment(handle, 61, &mut v) },
            PsStatus::PsInvalidArgument
        );
        assert_eq!(
            unsafe { ps_kernel_sigma_squared(handle, 50.0, 0.5, &mut v) },
            PsStatus::PsOk
        );
        assert!((v - 0.25).abs() < 1e-6);
        unsafe { ps_kernel_free(handle) };

        let mut bad: *mut PsKernel = ptr::null_mut();
        assert_eq!(unsafe { ps_kernel_create(0, &mut bad) }, PsStatus::PsInvalidArgument);
    }

    #[test]
    fn boundary_kernel_handles() {
        let mut handle: *mut PsBoundaryKernel = ptr::null_mut();
        assert_eq!(
            unsafe { ps_boundary_kernel_create(2, 10.0, &mut handle) },
            PsStatus::PsOk
        );
        let mut v = 0.0;
        assert_eq!(unsafe { ps_boundary_kernel_eval(handle, 0.0, 0.0, &mut v) }, PsStatus::PsOk);
        let want = 2f64.sqrt() * 10.0; // sqrt2 beta at the corner
        assert!((v - want).abs() < 1e-10, "{v} vs {want}");
        unsafe { ps_boundary_kernel_free(handle) };

        let mut fs = 0.0;
        assert_eq!(
            unsafe { ps_finite_sample_kernel_m2(10.0, 0.2, 0.3, &mut fs) },
            PsStatus::PsOk
        );
        assert!(fs.is_finite());
    }

    #[test]
    fn version_is_nul_terminated() {
        let ptr = ps_version();
        let s = unsafe { std::ffi::CStr::from_ptr(ptr) };
        assert_eq!(s.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
