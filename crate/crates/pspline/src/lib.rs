//! Penalized B-spline (P-spline) smoothing on an equally spaced design,
//! together with the closed-form equivalent kernels of the penalized
//! estimator and a simulation lab that checks the asymptotic theory at
//! desk scale.
//!
//! The crate is organized around the pipeline
//!
//! * [`basis`] — B-spline bases on equally spaced knots over `[0, 1]`,
//! * [`penalty`] — difference matrices and their structural identities,
//! * [`fit`] — the penalized least-squares fit and the degree correction,
//! * [`kernel`] — the interior equivalent kernel (Green's function of a
//!   constant-coefficient ODE) with moment certificates,
//! * [`boundary`] — boundary-corrected kernels near the ends of `[0, 1]`,
//! * [`lab`] — seeded, reproducible Monte Carlo studies (bias law, CLT
//!   coverage, convergence rates),
//! * [`cli`] — the command-line front end used by the `pspline` binary.

pub mod basis;
pub mod boundary;
pub mod cli;
pub mod dd;
pub mod fit;
pub mod kernel;
pub mod lab;
pub mod linalg;
pub mod penalty;
pub mod quad;
pub mod tolerances;

/// A named diagnostic outcome, used by the certification commands.
#[derive(Debug, Clone)]
pub struct CertCheck {
    /// What was checked.
    pub name: String,
    /// Worst observed deviation from the identity.
    pub max_error: f64,
    /// Tolerance the deviation is held against.
    pub tolerance: f64,
}

impl CertCheck {
    pub fn pass(&self) -> bool {
        self.max_error.is_finite() && self.max_error <= self.tolerance
    }
}
