//! The penalized least-squares fit
//! `min_b ||y - X b||^2 + lambda* ||D_m b||^2` on the equally spaced
//! design `t_i = i/n`, plus the degree-correction term relating a
//! degree-p fit to its degree-m companion when `p != m`.

use crate::basis::{BandedDesign, BasisError, KnotGrid, SplineFunction};
use crate::linalg::{solve_refined, BandedCholesky, BandedSymmetric, LinalgError};
use crate::penalty::{DifferenceMatrix, PenaltyError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("sample size {n} is not a multiple of the knot count {kn}")]
    SampleNotMultiple { n: usize, kn: usize },
    #[error("penalty order {m} needs at least m+1 coefficients (dim = {dim})")]
    PenaltyOrderTooLarge { m: usize, dim: usize },
    #[error("penalty order must be at least 1")]
    PenaltyOrderZero,
    #[error("penalty weight must be nonnegative, got {0}")]
    NegativePenalty(f64),
    #[error("unpenalized fit needs at least as many points as coefficients ({dim} > {n})")]
    Underdetermined { dim: usize, n: usize },
    #[error("observation vector has length {got}, expected {want}")]
    SampleLength { got: usize, want: usize },
    #[error("normal equations are singular at coefficient {pivot}; with lambda* = 0 the design does not determine all coefficients")]
    SingularSystem { pivot: usize },
    #[error("evaluation point {0} is outside [0, 1]")]
    DomainError(f64),
    #[error("degree correction for p < m is only defined on [0, {limit}], got t = {t}")]
    CorrectionDomain { t: f64, limit: f64 },
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Penalty(#[from] PenaltyError),
}

/// Problem sizes of one penalized fit. The effective smoothing
/// parameter `alpha = lambda*/(n K_n^{2m-1})` and the inverse bandwidth
/// `beta = alpha^{-1/(2m)}` are derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub n: usize,
    pub num_intervals: usize,
    pub degree: usize,
    pub penalty_order: usize,
    pub lambda_star: f64,
}

impl FitConfig {
    pub fn new(
        n: usize,
        num_intervals: usize,
        degree: usize,
        penalty_order: usize,
        lambda_star: f64,
    ) -> Result<Self, FitError> {
        let config = Self { n, num_intervals, degree, penalty_order, lambda_star };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let dim = self.num_intervals + self.degree;
        if self.penalty_order == 0 {
            return Err(FitError::PenaltyOrderZero);
        }
        if self.num_intervals == 0 || self.n == 0 || self.n % self.num_intervals != 0 {
            return Err(FitError::SampleNotMultiple { n: self.n, kn: self.num_intervals });
        }
        if self.penalty_order >= dim {
            return Err(FitError::PenaltyOrderTooLarge { m: self.penalty_order, dim });
        }
        if !(self.lambda_star >= 0.0) {
            return Err(FitError::NegativePenalty(self.lambda_star));
        }
        if self.lambda_star == 0.0 && dim > self.n {
            return Err(FitError::Underdetermined { dim, n: self.n });
        }
        // degree cap comes from the basis
        KnotGrid::new(self.num_intervals, self.degree)?;
        Ok(())
    }

    /// Design points `t_i = i/n`, so every `M_n`-th point is a knot.
    pub fn design_points(&self) -> Vec<f64> {
        (1..=self.n).map(|i| i as f64 / self.n as f64).collect()
    }

    /// `M_n = n / K_n`.
    pub fn points_per_interval(&self) -> usize {
        self.n / self.num_intervals
    }

    pub fn grid(&self) -> KnotGrid {
        KnotGrid::new(self.num_intervals, self.degree).expect("validated at construction")
    }

    /// Effective smoothing parameter `lambda* / (n K_n^{2m-1})`.
    pub fn alpha(&self) -> f64 {
        let kn = self.num_intervals as f64;
        self.lambda_star / (self.n as f64 * kn.powi(2 * self.penalty_order as i32 - 1))
    }

    /// Inverse bandwidth `alpha^{-1/(2m)}`.
    pub fn beta(&self) -> f64 {
        self.alpha().powf(-1.0 / (2.0 * self.penalty_order as f64))
    }
}

/// A fitted P-spline.
#[derive(Debug, Clone)]
pub struct PSplineFit {
    config: FitConfig,
    coeffs: Vec<f64>,
}

impl PSplineFit {
    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn spline(&self) -> SplineFunction {
        SplineFunction::new(self.config.grid(), self.coeffs.clone()).expect("length by construction")
    }

    /// Fitted values at the design points.
    pub fn fitted_values(&self) -> Vec<f64> {
        let design = BandedDesign::new(&self.config.grid(), &self.config.design_points())
            .expect("design points lie in [0, 1]");
        (0..self.config.n).map(|i| design.row_dot(i, &self.coeffs)).collect()
    }

    /// The degree-m spline sharing this fit's coefficients (truncated
    /// for p > m, zero-padded for p < m; in the latter case it
    /// represents the companion only on `[0, 1 - (m-p)/K_n]`).
    pub fn degree_m_companion(&self) -> SplineFunction {
        let m = self.config.penalty_order;
        let grid = KnotGrid::new(self.config.num_intervals, m).expect("order within bounds");
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(grid.dim(), 0.0);
        SplineFunction::new(grid, coeffs).expect("resized to dimension")
    }
}

pub fn predict(fit: &PSplineFit, x: f64) -> Result<f64, FitError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(FitError::DomainError(x));
    }
    Ok(fit.spline().eval(x)?)
}

/// Factorized normal equations, reusable across many response vectors
/// (the simulation lab fits thousands of replications against one
/// design).
pub struct PenalizedSolver {
    config: FitConfig,
    design: BandedDesign,
    normal: BandedSymmetric,
    chol: BandedCholesky,
}

impl PenalizedSolver {
    pub fn new(config: FitConfig) -> Result<Self, FitError> {
        config.validate()?;
        let grid = config.grid();
        let dim = grid.dim();
        let design = BandedDesign::new(&grid, &config.design_points())?;
        let bandwidth = config.degree.max(config.penalty_order);
        let mut normal = BandedSymmetric::zeros(dim, bandwidth);
        design.normal_matrix(&mut normal);
        let penalty = DifferenceMatrix::new(config.penalty_order, dim)?;
        let gram = penalty.gram_banded();
        for i in 0..dim {
            for j in i.saturating_sub(config.penalty_order)..=i {
                let g = gram.get(i, j);
                if g != 0.0 {
                    normal.add(i, j, config.lambda_star * g);
                }
            }
        }
        let chol = BandedCholesky::new(&normal).map_err(|err| match err {
            LinalgError::NotPositiveDefinite { pivot, .. } => FitError::SingularSystem { pivot },
            LinalgError::Singular { pivot, .. } => FitError::SingularSystem { pivot },
            LinalgError::DimensionMismatch { .. } => FitError::SingularSystem { pivot: 0 },
        })?;
        Ok(Self { config, design, normal, chol })
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    /// Solve for one response vector.
    pub fn solve(&self, y: &[f64]) -> Result<PSplineFit, FitError> {
        if y.len() != self.config.n {
            return Err(FitError::SampleLength { got: y.len(), want: self.config.n });
        }
        let rhs = self.design.rhs(y);
        let coeffs = solve_refined(&self.normal, &self.chol, &rhs);
        Ok(PSplineFit { config: self.config, coeffs })
    }

    /// Fitted value at design row `i` without materializing the spline.
    pub fn fitted_value(&self, fit: &PSplineFit, i: usize) -> f64 {
        self.design.row_dot(i, &fit.coeffs)
    }
}

/// One-shot fit.
pub fn fit(y: &[f64], config: &FitConfig) -> Result<PSplineFit, FitError> {
    PenalizedSolver::new(*config)?.solve(y)
}

/// The penalized objective `||y - X b||^2 + lambda* ||D_m b||^2`.
pub fn objective(config: &FitConfig, y: &[f64], coeffs: &[f64]) -> Result<f64, FitError> {
    let grid = config.grid();
    let design = BandedDesign::new(&grid, &config.design_points())?;
    let mut rss = 0.0;
    for (i, yi) in y.iter().enumerate() {
        let r = yi - design.row_dot(i, coeffs);
        rss += r * r;
    }
    let penalty = DifferenceMatrix::new(config.penalty_order, grid.dim())?;
    let pen: f64 = penalty.apply(coeffs).iter().map(|v| v * v).sum();
    Ok(rss + config.lambda_star * pen)
}

/// The correction `gamma(t) = f_p(t) - f_m(t)` between the degree-p fit
/// and its degree-m companion, computed by telescoping one degree at a
/// time with the exact coefficient differences:
/// `f_q(t) - f_{q-1}(t) = sum_i (Delta b_{i+1}) (K_n/q)(t - kappa_{i-q})
/// B_i^{[q-1]}(t)` over the q active functions.
///
/// Exactly zero when `p = m`. At a knot the left-limit value is
/// returned. For `p < m` the companion only exists on
/// `[0, 1 - (m-p)/K_n]`; beyond that the call errors.
pub fn correction_gamma(fit: &PSplineFit, t: f64) -> Result<f64, FitError> {
    let p = fit.config.degree;
    let m = fit.config.penalty_order;
    let kn = fit.config.num_intervals;
    if !(0.0..=1.0).contains(&t) {
        return Err(FitError::DomainError(t));
    }
    if p == m {
        return Ok(0.0);
    }
    if p < m {
        let limit = 1.0 - (m - p) as f64 / kn as f64;
        if t > limit + 1e-12 {
            return Err(FitError::CorrectionDomain { t, limit });
        }
    }
    let lo = p.min(m) + 1;
    let hi = p.max(m);
    let sign = if p > m { 1.0 } else { -1.0 };
    let coeffs = &fit.coeffs;
    let mut total = 0.0;
    for q in lo..=hi {
        let lower = KnotGrid::new(kn, q - 1)?;
        let (start, values) = lower.active_basis(t)?;
        let mut step = 0.0;
        for (offset, basis_val) in values.iter().enumerate() {
            if *basis_val == 0.0 {
                continue;
            }
            let i = start + offset + 1; // 1-based index on the degree q-1 basis
            debug_assert!(i < coeffs.len() + 1);
            let delta = coeffs[i] - coeffs[i - 1];
            let knot = (i as f64 - q as f64) / kn as f64;
            step += delta * (kn as f64 / q as f64) * (t - knot) * basis_val;
        }
        total += step;
    }
    Ok(sign * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn noisy_response(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (1..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                (2.0 * std::f64::consts::PI * t).sin() + sigma * rng.random_range(-1.0..1.0)
            })
            .collect()
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::new(100, 7, 2, 2, 1.0).is_err()); // 100 % 7 != 0
        assert!(FitConfig::new(100, 10, 2, 0, 1.0).is_err());
        assert!(FitConfig::new(100, 1, 1, 2, 1.0).is_err()); // m >= K_n + p
        assert!(FitConfig::new(100, 10, 2, 2, -1.0).is_err());
        assert!(FitConfig::new(10, 10, 3, 2, 0.0).is_err()); // 13 coeffs, 10 points
        let c = FitConfig::new(100, 10, 3, 2, 5.0).unwrap();
        assert_eq!(c.points_per_interval(), 10);
        // alpha = 5 / (100 * 10^3), beta = alpha^{-1/4}
        assert!((c.alpha() - 5e-5).abs() < 1e-18);
        assert!((c.beta() - 5e-5f64.powf(-0.25)).abs() < 1e-10);
    }

    #[test]
    fn constant_data_reproduced_exactly() {
        for (m, lambda) in [(1usize, 0.5), (2, 1e4), (3, 12.0)] {
            let config = FitConfig::new(60, 12, 3, m, lambda).unwrap();
            let fitted = fit(&vec![4.25; 60], &config).unwrap();
            for b in fitted.coeffs() {
                assert!((b - 4.25).abs() < 1e-10, "m={m}: {b}");
            }
            assert!((predict(&fitted, 0.37).unwrap() - 4.25).abs() < 1e-10);
        }
    }

    #[test]
    fn huge_penalty_shrinks_to_mean() {
        let config = FitConfig::new(80, 16, 2, 1, 1e12).unwrap();
        let y = noisy_response(80, 0.3, 11);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let fitted = fit(&y, &config).unwrap();
        for i in 0..=40 {
            let x = i as f64 / 40.0;
            assert!((predict(&fitted, x).unwrap() - mean).abs() < 1e-4);
        }
    }

    #[test]
    fn unpenalized_square_system_interpolates() {
        // n = K_n + p with distinct active rows: lambda* = 0 interpolates
        let config = FitConfig::new(10, 10, 0, 1, 0.0).unwrap();
        let y = noisy_response(10, 0.5, 3);
        let fitted = fit(&y, &config).unwrap();
        let values = fitted.fitted_values();
        for (a, b) in values.iter().zip(&y) {
            assert!((a - b).abs() < 1e-8);
        }
        // predict at design points equals the fitted entries
        for (i, want) in values.iter().enumerate() {
            let x = (i + 1) as f64 / 10.0;
            assert!((predict(&fitted, x).unwrap() - want).abs() < 1e-10);
        }
    }

    #[test]
    fn normal_equation_residual_is_small() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..8 {
            let kn = [5usize, 8, 10][rng.random_range(0..3)];
            let mn = rng.random_range(2..6);
            let n = kn * mn;
            let p = rng.random_range(0..4);
            let m = rng.random_range(1..=(kn + p - 1).min(3));
            let lambda = 10f64.powf(rng.random_range(-4.0..6.0));
            let config = FitConfig::new(n, kn, p, m, lambda).unwrap();
            let y = noisy_response(n, 1.0, rng.random());
            let fitted = fit(&y, &config).unwrap();

            let grid = config.grid();
            let design = crate::basis::design_matrix(&grid, &config.design_points()).unwrap();
            let d = DifferenceMatrix::new(m, grid.dim()).unwrap();
            let xty = design.t().dot(&ndarray::Array1::from(y.clone()));
            let xtx = design.t().dot(&design);
            let gram = d.entries().t().dot(d.entries());
            let b = ndarray::Array1::from(fitted.coeffs().to_vec());
            let lhs = xtx.dot(&b) + gram.dot(&b).mapv(|v| v * lambda);
            let resid = (&lhs - &xty).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let scale = xty.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(resid < 1e-8 * scale, "resid {resid:.2e} scale {scale:.2e}");
        }
    }

    #[test]
    fn objective_is_minimized() {
        let config = FitConfig::new(60, 10, 2, 2, 3.0).unwrap();
        let y = noisy_response(60, 0.5, 23);
        let best = fit(&y, &config).unwrap();
        let base = objective(&config, &y, best.coeffs()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..50 {
            let mut delta: Vec<f64> =
                (0..best.coeffs().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
            for d in &mut delta {
                *d *= 1e-3 / norm;
            }
            let perturbed: Vec<f64> =
                best.coeffs().iter().zip(&delta).map(|(b, d)| b + d).collect();
            assert!(objective(&config, &y, &perturbed).unwrap() > base);
        }
    }

    #[test]
    fn regularization_path_is_monotone() {
        let y = noisy_response(120, 0.8, 31);
        let mut previous = f64::INFINITY;
        let mut lambda = 1e-3;
        for _ in 0..6 {
            let config = FitConfig::new(120, 12, 3, 2, lambda).unwrap();
            let fitted = fit(&y, &config).unwrap();
            let d = DifferenceMatrix::new(2, config.grid().dim()).unwrap();
            let pen: f64 = d.apply(fitted.coeffs()).iter().map(|v| v * v).sum();
            assert!(pen <= previous * (1.0 + 1e-12), "{pen} vs {previous}");
            previous = pen;
            lambda *= 100.0;
        }
    }

    #[test]
    fn correction_vanishes_when_p_equals_m() {
        let config = FitConfig::new(40, 8, 2, 2, 1.0).unwrap();
        let fitted = fit(&noisy_response(40, 0.4, 7), &config).unwrap();
        assert_eq!(correction_gamma(&fitted, 0.43).unwrap(), 0.0);
    }

    #[test]
    fn correction_vanishes_for_constant_coefficients() {
        let config = FitConfig::new(40, 10, 3, 1, 2.0).unwrap();
        let fitted = fit(&vec![1.5; 40], &config).unwrap();
        for i in 1..20 {
            let t = i as f64 / 20.0 - 0.013;
            assert!(correction_gamma(&fitted, t).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn correction_matches_two_evaluation_oracle() {
        // p > m: direct difference of the two splines
        let config = FitConfig::new(50, 10, 2, 1, 0.8).unwrap();
        let fitted = fit(&noisy_response(50, 0.6, 99), &config).unwrap();
        let companion = fitted.degree_m_companion();
        let t = 0.43;
        let want = fitted.spline().eval(t).unwrap() - companion.eval(t).unwrap();
        let got = correction_gamma(&fitted, t).unwrap();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn fit_plus_correction_is_consistent() {
        // p > m and p < m, over a sweep of non-knot points
        for (p, m) in [(3usize, 1usize), (3, 2), (1, 2), (0, 2)] {
            let config = FitConfig::new(60, 12, p, m, 0.7).unwrap();
            let fitted = fit(&noisy_response(60, 0.5, 1234 + p as u64), &config).unwrap();
            let companion = fitted.degree_m_companion();
            let limit = if p < m { 1.0 - (m - p) as f64 / 12.0 } else { 1.0 };
            for i in 0..200 {
                let t = (i as f64 + 0.31) / 200.0 * limit;
                let gamma = correction_gamma(&fitted, t).unwrap();
                let direct = fitted.spline().eval(t).unwrap() - companion.eval(t).unwrap();
                assert!(
                    (gamma - direct).abs() < 1e-11,
                    "p={p} m={m} t={t}: {gamma} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn correction_domain_for_low_degree() {
        let config = FitConfig::new(60, 12, 1, 2, 0.7).unwrap();
        let fitted = fit(&noisy_response(60, 0.5, 8), &config).unwrap();
        let limit = 1.0 - 1.0 / 12.0;
        assert!(correction_gamma(&fitted, limit - 1e-6).is_ok());
        assert!(matches!(
            correction_gamma(&fitted, limit + 0.01),
            Err(FitError::CorrectionDomain { .. })
        ));
    }

    #[test]
    fn correction_shrinks_as_knots_double() {
        // smooth truth, noiseless: sup |gamma| over the interior drops
        // when K_n doubles (the correction is O(1/K_n))
        let sup_gamma = |kn: usize| {
            let n = 3200;
            let config =
                FitConfig::new(n, kn, 3, 2, 1e-4 * n as f64 * (kn as f64).powi(3)).unwrap();
            let y: Vec<f64> = (1..=n)
                .map(|i| (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin())
                .collect();
            let fitted = fit(&y, &config).unwrap();
            (0..=100)
                .map(|i| {
                    let t = 0.2 + 0.6 * i as f64 / 100.0 + 1e-4;
                    correction_gamma(&fitted, t).unwrap().abs()
                })
                .fold(0.0f64, f64::max)
        };
        let coarse = sup_gamma(80);
        let fine = sup_gamma(160);
        assert!(fine < coarse, "{fine} vs {coarse}");
    }
}
