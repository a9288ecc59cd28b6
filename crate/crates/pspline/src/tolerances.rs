//! Numeric tolerances used by the certification diagnostics, each with
//! its origin. Monte Carlo study thresholds are deliberately *not* here:
//! they are frozen in `scenarios/tolerances.json` so the statistical
//! gates live in one pre-registered config file.

/// Identity checks built from integer-weight matrix products on inputs
/// of order one. Rounding accumulates over a few dozen additions.
pub const CM_IDENTITY: f64 = 1e-10;

/// Difference operators annihilating low-degree polynomial sequences,
/// relative to the largest input entry. Integer arithmetic is exact
/// below 2^53; the allowance covers larger sequences at high order.
pub const ANNIHILATION_REL: f64 = 1e-12;

/// Trigonometric orthogonality of the kernel coefficient systems
/// (`A^e (A^e)^T = (m/2) I` and friends): one dot product of unit rows.
pub const SYSTEM_ORTHOGONALITY: f64 = 1e-12;

/// Odd derivative conditions of the kernel at 0, scaled by `beta^order`;
/// evaluated through repeated 2x2 matrix powers (condition number 1).
pub const DEFINING_CONDITIONS: f64 = 1e-9;

/// Membership of each kernel mode in the homogeneous ODE, checked as
/// `A_k^{2m} = -I` (even) or `+I` (odd) by repeated multiplication.
pub const ODE_MEMBERSHIP: f64 = 1e-12;

/// Base tolerance for the kernel moment certificates (orders up to
/// `2m - 1`, quadrature in double-double arithmetic).
pub const MOMENT_BASE: f64 = 1e-8;

/// Moment certificate tolerance at a given order.
///
/// The moment of order `k` is a cancellation of per-mode terms of size
/// `~ k!`, so rounding the kernel coefficients to f64 (half an ulp
/// each, `m` of them, sensitivity `2 k!` apiece) already limits the
/// achievable absolute accuracy to about `m * k! * eps / 8`. Through
/// order 11 (m <= 6) this floor sits below [`MOMENT_BASE`]; beyond, the
/// floor itself is the documented tolerance.
pub fn moment_tolerance(m: usize, order: usize) -> f64 {
    let mut factorial = 1.0f64;
    for i in 2..=order {
        factorial *= i as f64;
    }
    MOMENT_BASE.max(m as f64 * factorial * f64::EPSILON / 8.0)
}

/// Pointwise agreement with the closed-form kernels at orders 1..3,
/// whose coefficients are exact simple radicals.
pub const KERNEL_CLOSED_FORM: f64 = 1e-12;

/// Pointwise agreement with the order-4 closed form, which is only
/// published to four decimal places.
pub const KERNEL_CLOSED_FORM_M4: f64 = 5e-4;

/// Boundary kernel at the left edge against the smoothing-spline form
/// `sqrt(2) e^{-beta s / sqrt 2} cos(beta s / sqrt 2)` (order 2).
pub const SILVERMAN_AGREEMENT: f64 = 1e-12;

/// Exact-mode versus asymptotic-mode boundary coefficient vectors at
/// `beta = 30`; the dropped blocks have entries `O(e^{-beta mu})`.
pub const BOUNDARY_MODE_AGREEMENT: f64 = 1e-8;

/// Boundary solve residuals (2m x 2m LU with partial pivoting).
pub const BOUNDARY_RESIDUAL: f64 = 1e-10;

/// Condition-number ceiling for the boundary blocks.
pub const BOUNDARY_CONDITION_MAX: f64 = 1e6;

/// Relative residual of the penalized normal equations after iterative
/// refinement.
pub const FIT_RESIDUAL_REL: f64 = 1e-8;

/// Default smallest inverse bandwidth for boundary kernels; below this
/// the dropped `O(e^{-beta})` blocks are no longer negligible and the
/// constructors attach a warning.
pub const BETA_FLOOR: f64 = 5.0;
