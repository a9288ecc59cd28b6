//! Seeded Monte Carlo studies that probe the asymptotic behavior of the
//! penalized fit at desk scale: kernel equivalence of the estimator,
//! the first-order bias law, CLT coverage at interior points, and the
//! mean-squared-error convergence rate.
//!
//! Every study is bit-reproducible: replication `r` draws its noise
//! from a ChaCha stream keyed by `(seed, r)`, replications may run in
//! parallel, and aggregation always happens in replication order.

mod truth;

pub use truth::TruthFn;

use crate::basis::BandedDesign;
use crate::fit::{correction_gamma, FitConfig, FitError, PenalizedSolver};
use crate::kernel::{sigma_k_squared, solve_kernel_coefficients, KernelError};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

/// Two-sided 95% standard-normal quantile.
pub const Z_95: f64 = 1.959963984540054;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("equivalence study requires p = m (got p = {p}, m = {m}); use the bias study with the degree correction instead")]
    DegreeMismatch { p: usize, m: usize },
    #[error("bias study needs at least 200 replications, got {0}")]
    TooFewReplications(usize),
    #[error("CLT study needs at least 1000 replications, got {0}")]
    TooFewCltReplications(usize),
    #[error("rate study needs a ladder of at least 4 sample sizes, got {0}")]
    LadderTooShort(usize),
    #[error("scenario is missing the `{0}` field required by this study")]
    MissingField(&'static str),
    #[error("rate study requires rate-tuned smoothing (c, gamma)")]
    NeedsRateTuning,
    #[error("with p < m the degree correction only exists on [0, {limit}]; the evaluation grid reaches {reach}")]
    GridOutsideCorrectionDomain { limit: f64, reach: f64 },
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Basis(#[from] crate::basis::BasisError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Equivalence,
    Bias,
    Clt,
    Rate,
}

/// How the penalty weight is chosen. `Alpha` and `RateTuned` derive
/// `lambda* = alpha n K_n^{2m-1}`; rate tuning uses
/// `alpha = c^{2m} n^{-2m/(4m+1)}` and picks `K_n` as the smallest
/// divisor of `n` at least `n^gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Smoothing {
    LambdaStar { value: f64 },
    Alpha { value: f64 },
    RateTuned { c: f64, gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { min: 0.2, max: 0.8, points: 41 }
    }
}

impl GridSpec {
    pub fn to_points(self) -> Vec<f64> {
        let span = self.max - self.min;
        (0..self.points)
            .map(|g| self.min + span * g as f64 / (self.points - 1).max(1) as f64)
            .collect()
    }
}

/// One simulation experiment, as parsed from a scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScenario {
    pub study: StudyKind,
    pub truth: TruthFn,
    pub p: usize,
    pub m: usize,
    pub sigma: f64,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub kn: Option<usize>,
    pub smoothing: Smoothing,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub t_points: Option<Vec<f64>>,
    #[serde(default)]
    pub ladder: Option<Vec<usize>>,
}

impl SimScenario {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn grid_points(&self) -> Vec<f64> {
        self.grid.unwrap_or_default().to_points()
    }

    /// Resolve knot count and penalty weight for a given sample size.
    fn resolve_config(&self, n: usize) -> Result<FitConfig, LabError> {
        let kn = match (self.kn, self.smoothing) {
            (Some(kn), _) => kn,
            (None, Smoothing::RateTuned { gamma, .. }) => {
                smallest_divisor_at_least(n, (n as f64).powf(gamma).ceil() as usize)
            }
            (None, _) => return Err(LabError::MissingField("kn")),
        };
        let two_m = 2 * self.m as i32;
        let alpha = match self.smoothing {
            Smoothing::LambdaStar { value } => {
                return Ok(FitConfig::new(n, kn, self.p, self.m, value)?);
            }
            Smoothing::Alpha { value } => value,
            Smoothing::RateTuned { c, .. } => {
                // alpha = c^{2m} n^{-2m/(4m+1)}
                c.powi(two_m) * (n as f64).powf(-(two_m as f64) / (2 * two_m + 1) as f64)
            }
        };
        let lambda = alpha * n as f64 * (kn as f64).powi(two_m - 1);
        Ok(FitConfig::new(n, kn, self.p, self.m, lambda)?)
    }
}

/// With `p < m` the degree correction is only defined left of
/// `1 - (m-p)/K_n`; reject evaluation points beyond it up front.
fn check_correction_domain(
    config: &FitConfig,
    points: &[f64],
) -> Result<(), LabError> {
    let (p, m) = (config.degree, config.penalty_order);
    if p >= m {
        return Ok(());
    }
    let limit = 1.0 - (m - p) as f64 / config.num_intervals as f64;
    let reach = points.iter().fold(0.0f64, |a, b| a.max(*b));
    if reach > limit + 1e-12 {
        return Err(LabError::GridOutsideCorrectionDomain { limit, reach });
    }
    Ok(())
}

/// Smallest divisor of `n` that is at least `target` (falls back to
/// `n` itself).
pub fn smallest_divisor_at_least(n: usize, target: usize) -> usize {
    let target = target.clamp(1, n);
    (target..=n).find(|d| n % d == 0).unwrap_or(n)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportMeta {
    pub library_version: String,
    pub replications: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointSummary {
    pub t: f64,
    pub mean_error: f64,
    pub sd_error: f64,
    pub se_mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceSummary {
    pub sup_gaps: Vec<f64>,
    pub median_sup_gap: f64,
    pub max_sup_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoveragePoint {
    pub t: f64,
    /// fraction of replications with |z| below the 95% quantile, with
    /// the first-order bias term subtracted from the numerator
    pub coverage: f64,
    pub mean_z: f64,
    pub sd_z: f64,
    pub anderson_darling: f64,
    pub sigma_k_squared: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateEntry {
    pub n: usize,
    pub kn: usize,
    pub lambda_star: f64,
    pub beta: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateSummary {
    pub entries: Vec<RateEntry>,
    pub slope: f64,
    pub slope_se: f64,
}

/// Aggregates of one study run. Only deterministic quantities are
/// stored, so a fixed seed reproduces the report bit for bit.
#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub study: StudyKind,
    pub scenario: SimScenario,
    pub meta: ReportMeta,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<PointSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equivalence: Option<EquivalenceSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias_slope: Option<SlopeFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<Vec<CoveragePoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateSummary>,
}

impl StudyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// One per-replication record for the optional CSV dump.
#[derive(Debug, Clone)]
pub struct RepRecord {
    pub rep: usize,
    pub values: Vec<f64>,
}

/// Column names for the per-replication records of each study.
pub fn rep_record_header(kind: StudyKind) -> &'static [&'static str] {
    match kind {
        StudyKind::Equivalence => &["rep", "sup_gap"],
        StudyKind::Bias => &["rep", "mean_error"],
        StudyKind::Clt => &["rep", "z_at_first_t"],
        StudyKind::Rate => &["rep", "n", "mse"],
    }
}

fn blank_report(scenario: &SimScenario, warnings: Vec<String>) -> StudyReport {
    StudyReport {
        study: scenario.study,
        scenario: scenario.clone(),
        meta: ReportMeta {
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            replications: scenario.replications,
            warnings,
        },
        points: None,
        equivalence: None,
        bias_slope: None,
        coverage: None,
        rate: None,
    }
}

/// Noise stream for one replication: derived from the scenario seed
/// and the replication index only.
fn replication_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream + 1);
    rng
}

fn draw_noise(rng: &mut ChaCha12Rng, n: usize, sigma: f64) -> Vec<f64> {
    (0..n)
        .map(|_| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

fn bias_sign(m: usize) -> f64 {
    // (-1)^{m-1}
    if m % 2 == 1 {
        1.0
    } else {
        -1.0
    }
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

/// Dispatch on the scenario's study kind.
pub fn run_study(scenario: &SimScenario) -> Result<(StudyReport, Vec<RepRecord>), LabError> {
    match scenario.study {
        StudyKind::Equivalence => run_equivalence_study(scenario),
        StudyKind::Bias => run_bias_study(scenario),
        StudyKind::Clt => run_clt_study(scenario),
        StudyKind::Rate => run_rate_study(scenario),
    }
}

/// Compare each replication's fit against the kernel-smoother
/// representation `f + (-1)^{m-1} alpha f^(2m) + (1/n) sum K(t, t_i)
/// eps_i` built from the same noise draw; report the sup-norm gaps.
pub fn run_equivalence_study(
    scenario: &SimScenario,
) -> Result<(StudyReport, Vec<RepRecord>), LabError> {
    if scenario.p != scenario.m {
        return Err(LabError::DegreeMismatch { p: scenario.p, m: scenario.m });
    }
    let n = scenario.n.ok_or(LabError::MissingField("n"))?;
    let config = scenario.resolve_config(n)?;
    let solver = PenalizedSolver::new(config)?;
    let kernel = solve_kernel_coefficients(scenario.m)?;
    let alpha = config.alpha();
    let beta = config.beta();
    let grid = scenario.grid_points();
    let grid_design = BandedDesign::new(&config.grid(), &grid)?;
    let design_points = config.design_points();
    let truth = &scenario.truth;
    let sign = bias_sign(scenario.m);

    let per_rep: Vec<(Vec<f64>, f64)> = (0..scenario.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(scenario.seed, rep as u64);
            let eps = draw_noise(&mut rng, n, scenario.sigma);
            let y: Vec<f64> = design_points
                .iter()
                .zip(&eps)
                .map(|(t, e)| truth.value(*t) + e)
                .collect();
            let fit = solver.solve(&y).expect("validated configuration");
            let mut errors = Vec::with_capacity(grid.len());
            let mut sup = 0.0f64;
            for (g, t) in grid.iter().enumerate() {
                let fhat = grid_design.row_dot(g, fit.coeffs());
                let kernel_sum: f64 = design_points
                    .iter()
                    .zip(&eps)
                    .map(|(ti, e)| kernel.value(beta, (t - ti).abs()) * e)
                    .sum::<f64>()
                    / n as f64;
                let reference = truth.value(*t)
                    + sign * alpha * truth.derivative(2 * scenario.m, *t)
                    + kernel_sum;
                let err = fhat - reference;
                sup = sup.max(err.abs());
                errors.push(err);
            }
            (errors, sup)
        })
        .collect();

    let sup_gaps: Vec<f64> = per_rep.iter().map(|(_, sup)| *sup).collect();
    let mut sorted = sup_gaps.clone();
    sorted.sort_by(f64::total_cmp);
    let median = median_of_sorted(&sorted);
    let errors: Vec<Vec<f64>> = per_rep.iter().map(|(e, _)| e.clone()).collect();
    let points = summarize_points(&grid, &errors);

    let mut report = blank_report(scenario, Vec::new());
    report.points = Some(points);
    report.equivalence = Some(EquivalenceSummary {
        max_sup_gap: sorted.last().copied().unwrap_or(0.0),
        median_sup_gap: median,
        sup_gaps,
    });
    let records = per_rep
        .iter()
        .enumerate()
        .map(|(rep, (_, sup))| RepRecord { rep, values: vec![*sup] })
        .collect();
    Ok((report, records))
}

/// Estimate `E[fhat(t)] - f(t)` over the grid and regress it on
/// `alpha f^(2m)(t)`; the slope should sit near `(-1)^{m-1}`. When
/// `p != m` the computed degree correction is subtracted first.
pub fn run_bias_study(scenario: &SimScenario) -> Result<(StudyReport, Vec<RepRecord>), LabError> {
    if scenario.replications < 200 {
        return Err(LabError::TooFewReplications(scenario.replications));
    }
    let n = scenario.n.ok_or(LabError::MissingField("n"))?;
    let config = scenario.resolve_config(n)?;
    let solver = PenalizedSolver::new(config)?;
    let alpha = config.alpha();
    let grid = scenario.grid_points();
    let grid_design = BandedDesign::new(&config.grid(), &grid)?;
    let design_points = config.design_points();
    let truth = &scenario.truth;
    let corrected = scenario.p != scenario.m;
    check_correction_domain(&config, &grid)?;

    let per_rep: Vec<Vec<f64>> = (0..scenario.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(scenario.seed, rep as u64);
            let eps = draw_noise(&mut rng, n, scenario.sigma);
            let y: Vec<f64> = design_points
                .iter()
                .zip(&eps)
                .map(|(t, e)| truth.value(*t) + e)
                .collect();
            let fit = solver.solve(&y).expect("validated configuration");
            grid.iter()
                .enumerate()
                .map(|(g, t)| {
                    let mut value = grid_design.row_dot(g, fit.coeffs());
                    if corrected {
                        value -= correction_gamma(&fit, *t).expect("grid checked against domain");
                    }
                    value - truth.value(*t)
                })
                .collect()
        })
        .collect();

    let points = summarize_points(&grid, &per_rep);
    let predictor: Vec<f64> = grid
        .iter()
        .map(|t| alpha * truth.derivative(2 * scenario.m, *t))
        .collect();
    let mean_bias: Vec<f64> = points.iter().map(|p| p.mean_error).collect();
    let slope = least_squares(&predictor, &mean_bias);

    let mut report = blank_report(scenario, Vec::new());
    report.points = Some(points);
    report.bias_slope = Some(slope);
    let records = per_rep
        .iter()
        .enumerate()
        .map(|(rep, errs)| RepRecord {
            rep,
            values: vec![errs.iter().sum::<f64>() / errs.len() as f64],
        })
        .collect();
    Ok((report, records))
}

/// Standardized errors `z = sqrt(n/beta) (fhat - f - bias) / sigma_K`
/// at fixed interior points; reports empirical 95% coverage and an
/// Anderson-Darling normality statistic per point.
pub fn run_clt_study(scenario: &SimScenario) -> Result<(StudyReport, Vec<RepRecord>), LabError> {
    if scenario.replications < 1000 {
        return Err(LabError::TooFewCltReplications(scenario.replications));
    }
    let n = scenario.n.ok_or(LabError::MissingField("n"))?;
    let config = scenario.resolve_config(n)?;
    let solver = PenalizedSolver::new(config)?;
    let kernel = solve_kernel_coefficients(scenario.m)?;
    let alpha = config.alpha();
    let beta = config.beta();
    let t_points = scenario.t_points.clone().unwrap_or_else(|| vec![0.3, 0.5, 0.7]);
    let point_design = BandedDesign::new(&config.grid(), &t_points)?;
    let design_points = config.design_points();
    let truth = &scenario.truth;
    let corrected = scenario.p != scenario.m;
    let sign = bias_sign(scenario.m);
    check_correction_domain(&config, &t_points)?;

    let mut warnings = Vec::new();
    let mut sigma_k2 = Vec::with_capacity(t_points.len());
    for t in &t_points {
        let s = sigma_k_squared(&kernel, beta, *t)?;
        if let Some(w) = s.warning {
            warnings.push(w);
        }
        sigma_k2.push(s.value);
    }

    let scale = (n as f64 / beta).sqrt();
    let per_rep: Vec<Vec<f64>> = (0..scenario.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(scenario.seed, rep as u64);
            let eps = draw_noise(&mut rng, n, scenario.sigma);
            let y: Vec<f64> = design_points
                .iter()
                .zip(&eps)
                .map(|(t, e)| truth.value(*t) + e)
                .collect();
            let fit = solver.solve(&y).expect("validated configuration");
            t_points
                .iter()
                .enumerate()
                .map(|(j, t)| {
                    let mut fhat = point_design.row_dot(j, fit.coeffs());
                    if corrected {
                        fhat -= correction_gamma(&fit, *t).expect("points checked against domain");
                    }
                    let bias = sign * alpha * truth.derivative(2 * scenario.m, *t);
                    let sigma_hat = (scenario.sigma * scenario.sigma * sigma_k2[j]).sqrt();
                    if sigma_hat == 0.0 {
                        0.0
                    } else {
                        scale * (fhat - truth.value(*t) - bias) / sigma_hat
                    }
                })
                .collect()
        })
        .collect();

    let mut coverage = Vec::with_capacity(t_points.len());
    for (j, t) in t_points.iter().enumerate() {
        let z: Vec<f64> = per_rep.iter().map(|row| row[j]).collect();
        let reps = z.len() as f64;
        let mean = z.iter().sum::<f64>() / reps;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1.0);
        let sd = var.sqrt();
        let covered = z.iter().filter(|v| v.abs() <= Z_95).count() as f64 / reps;
        coverage.push(CoveragePoint {
            t: *t,
            coverage: covered,
            mean_z: mean,
            sd_z: sd,
            anderson_darling: anderson_darling(&z),
            sigma_k_squared: sigma_k2[j],
        });
    }

    let mut report = blank_report(scenario, warnings);
    report.coverage = Some(coverage);
    let records = per_rep
        .iter()
        .enumerate()
        .map(|(rep, row)| RepRecord { rep, values: vec![row[0]] })
        .collect();
    Ok((report, records))
}

/// Fit the slope of `log MSE` against `log n` over a ladder of sample
/// sizes, each rate-tuned per the scenario's `(c, gamma)`.
pub fn run_rate_study(scenario: &SimScenario) -> Result<(StudyReport, Vec<RepRecord>), LabError> {
    let ladder = scenario.ladder.clone().ok_or(LabError::MissingField("ladder"))?;
    if ladder.len() < 4 {
        return Err(LabError::LadderTooShort(ladder.len()));
    }
    if !matches!(scenario.smoothing, Smoothing::RateTuned { .. }) {
        return Err(LabError::NeedsRateTuning);
    }
    let grid = scenario.grid_points();
    let truth = &scenario.truth;
    let mut entries = Vec::with_capacity(ladder.len());
    let mut records = Vec::new();

    for (ladder_idx, &n) in ladder.iter().enumerate() {
        let config = scenario.resolve_config(n)?;
        let solver = PenalizedSolver::new(config)?;
        let grid_design = BandedDesign::new(&config.grid(), &grid)?;
        let design_points = config.design_points();
        let sq_errors: Vec<f64> = (0..scenario.replications)
            .into_par_iter()
            .map(|rep| {
                let stream = (ladder_idx * scenario.replications + rep) as u64;
                let mut rng = replication_rng(scenario.seed, stream);
                let eps = draw_noise(&mut rng, n, scenario.sigma);
                let y: Vec<f64> = design_points
                    .iter()
                    .zip(&eps)
                    .map(|(t, e)| truth.value(*t) + e)
                    .collect();
                let fit = solver.solve(&y).expect("validated configuration");
                grid.iter()
                    .enumerate()
                    .map(|(g, t)| {
                        let err = grid_design.row_dot(g, fit.coeffs()) - truth.value(*t);
                        err * err
                    })
                    .sum::<f64>()
                    / grid.len() as f64
            })
            .collect();
        let mse = sq_errors.iter().sum::<f64>() / sq_errors.len() as f64;
        for (rep, v) in sq_errors.iter().enumerate() {
            records.push(RepRecord { rep, values: vec![n as f64, *v] });
        }
        entries.push(RateEntry {
            n,
            kn: config.num_intervals,
            lambda_star: config.lambda_star,
            beta: config.beta(),
            mse,
        });
    }

    let log_n: Vec<f64> = entries.iter().map(|e| (e.n as f64).ln()).collect();
    let log_mse: Vec<f64> = entries.iter().map(|e| e.mse.ln()).collect();
    let slope = least_squares(&log_n, &log_mse);

    let mut report = blank_report(scenario, Vec::new());
    report.rate = Some(RateSummary { entries, slope: slope.slope, slope_se: slope.slope_se });
    Ok((report, records))
}

fn summarize_points(grid: &[f64], per_rep: &[Vec<f64>]) -> Vec<PointSummary> {
    let reps = per_rep.len() as f64;
    grid.iter()
        .enumerate()
        .map(|(g, t)| {
            let mean = per_rep.iter().map(|row| row[g]).sum::<f64>() / reps;
            let var = if per_rep.len() > 1 {
                per_rep.iter().map(|row| (row[g] - mean).powi(2)).sum::<f64>() / (reps - 1.0)
            } else {
                0.0
            };
            PointSummary {
                t: *t,
                mean_error: mean,
                sd_error: var.sqrt(),
                se_mean: (var / reps).sqrt(),
            }
        })
        .collect()
}

/// Ordinary least squares of `y` on `x` with intercept.
fn least_squares(x: &[f64], y: &[f64]) -> SlopeFit {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mean_x).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mean_x) * (b - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let dof = (x.len() as f64 - 2.0).max(1.0);
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    SlopeFit { slope, intercept, slope_se: (rss / dof / sxx).sqrt() }
}

/// Anderson-Darling statistic against the standard normal.
fn anderson_darling(sample: &[f64]) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut z = sample.to_vec();
    z.sort_by(f64::total_cmp);
    let n = z.len();
    let nf = n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let phi_low = normal.cdf(z[i]).clamp(1e-300, 1.0 - 1e-16);
        let phi_high = normal.cdf(z[n - 1 - i]).clamp(1e-300, 1.0 - 1e-16);
        acc += (2.0 * i as f64 + 1.0) * (phi_low.ln() + (1.0 - phi_high).ln());
    }
    -nf - acc / nf
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_scenario(kind: StudyKind) -> SimScenario {
        SimScenario {
            study: kind,
            truth: TruthFn::Sine { amplitude: 1.0 },
            p: 2,
            m: 2,
            sigma: 0.3,
            replications: 4,
            seed: 7,
            n: Some(400),
            kn: Some(40),
            smoothing: Smoothing::Alpha { value: 1e-4 },
            grid: None,
            t_points: None,
            ladder: None,
        }
    }

    #[test]
    fn divisor_rule() {
        assert_eq!(smallest_divisor_at_least(400, 11), 16);
        assert_eq!(smallest_divisor_at_least(400, 400), 400);
        assert_eq!(smallest_divisor_at_least(12800, 4970), 6400);
        assert_eq!(smallest_divisor_at_least(100, 1), 1);
    }

    #[test]
    fn scenario_roundtrip_and_resolution() {
        let scenario = base_scenario(StudyKind::Bias);
        let text = serde_json::to_string(&scenario).unwrap();
        let back: SimScenario = serde_json::from_str(&text).unwrap();
        assert_eq!(back.n, Some(400));
        let config = scenario.resolve_config(400).unwrap();
        assert_eq!(config.num_intervals, 40);
        assert!((config.alpha() - 1e-4).abs() < 1e-18);

        let rt = SimScenario {
            kn: None,
            smoothing: Smoothing::RateTuned { c: 0.3, gamma: 0.45 },
            ..base_scenario(StudyKind::Rate)
        };
        let config = rt.resolve_config(400).unwrap();
        // 400^0.45 = 14.8 -> divisor 16
        assert_eq!(config.num_intervals, 16);
        let want_alpha = 0.3f64.powi(4) * 400f64.powf(-4.0 / 9.0);
        assert!((config.alpha() - want_alpha).abs() < 1e-12 * want_alpha);
    }

    #[test]
    fn equivalence_requires_matching_degree() {
        let mut scenario = base_scenario(StudyKind::Equivalence);
        scenario.p = 3;
        assert!(matches!(
            run_equivalence_study(&scenario),
            Err(LabError::DegreeMismatch { .. })
        ));
    }

    #[test]
    fn noiseless_equivalence_gap_is_the_bias_remainder() {
        // smooth truth, sigma = 0: the gap is the deterministic
        // remainder beyond the first-order bias term. The boundary
        // layer of the fit penetrates e^{-beta mu (1-t)}, so beta must
        // be large enough that it has died off by t = 0.8; beta = 60
        // keeps it under the frozen bound with alpha = 60^{-4}.
        let scenario = SimScenario {
            sigma: 0.0,
            replications: 1,
            truth: TruthFn::Polynomial { coeffs: vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0] },
            n: Some(3200),
            kn: Some(160),
            smoothing: Smoothing::Alpha { value: 7.716049382716049e-8 },
            ..base_scenario(StudyKind::Equivalence)
        };
        let (report, _) = run_equivalence_study(&scenario).unwrap();
        let gap = report.equivalence.unwrap().max_sup_gap;
        // quintic: sup |f''''| = 120 on [0,1]
        assert!(gap < 0.5 * 7.716049382716049e-8 * 120.0, "gap {gap}");

        // linear truth: the fourth derivative vanishes
        let scenario = SimScenario {
            sigma: 0.0,
            replications: 1,
            truth: TruthFn::Polynomial { coeffs: vec![0.3, 1.1] },
            n: Some(3200),
            kn: Some(160),
            ..base_scenario(StudyKind::Equivalence)
        };
        let (report, _) = run_equivalence_study(&scenario).unwrap();
        assert!(report.equivalence.unwrap().max_sup_gap < 1e-3);
    }

    #[test]
    fn equivalence_gap_shrinks_with_n() {
        let make = |n: usize| SimScenario {
            sigma: 0.3,
            replications: 20,
            n: Some(n),
            kn: None,
            smoothing: Smoothing::RateTuned { c: 0.3, gamma: 0.45 },
            ..base_scenario(StudyKind::Equivalence)
        };
        let (small, _) = run_equivalence_study(&make(800)).unwrap();
        let (large, _) = run_equivalence_study(&make(3200)).unwrap();
        let g_small = small.equivalence.unwrap().median_sup_gap;
        let g_large = large.equivalence.unwrap().median_sup_gap;
        assert!(g_large < g_small, "{g_large} vs {g_small}");
    }

    #[test]
    fn bias_study_guards_replications() {
        let scenario = SimScenario { replications: 50, ..base_scenario(StudyKind::Bias) };
        assert!(matches!(run_bias_study(&scenario), Err(LabError::TooFewReplications(50))));
    }

    #[test]
    fn polynomial_below_penalty_order_has_no_bias() {
        // cubic truth with m = 2: f'''' = 0, measured bias is MC noise
        let scenario = SimScenario {
            replications: 200,
            truth: TruthFn::Polynomial { coeffs: vec![0.2, 1.0, -0.5, 0.3] },
            sigma: 0.2,
            ..base_scenario(StudyKind::Bias)
        };
        let (report, _) = run_bias_study(&scenario).unwrap();
        for point in report.points.unwrap() {
            assert!(
                point.mean_error.abs() < 3.5 * point.se_mean.max(1e-12),
                "t={} bias {} se {}",
                point.t,
                point.mean_error,
                point.se_mean
            );
        }
    }

    #[test]
    fn clt_study_guards_replications() {
        let scenario = SimScenario { replications: 100, ..base_scenario(StudyKind::Clt) };
        assert!(matches!(run_clt_study(&scenario), Err(LabError::TooFewCltReplications(100))));
    }

    #[test]
    fn zero_noise_coverage_is_total() {
        // sigma = 0 degenerates z to 0: the interval covers trivially
        // and the spread is gone
        let scenario = SimScenario {
            replications: 1000,
            sigma: 0.0,
            n: Some(800),
            kn: Some(40),
            ..base_scenario(StudyKind::Clt)
        };
        let (report, _) = run_clt_study(&scenario).unwrap();
        for point in report.coverage.unwrap() {
            assert_eq!(point.coverage, 1.0);
            assert_eq!(point.sd_z, 0.0);
        }
    }

    #[test]
    fn estimator_spread_scales_with_noise() {
        let run = |sigma: f64| {
            let scenario = SimScenario {
                replications: 1000,
                sigma,
                n: Some(800),
                kn: Some(40),
                truth: TruthFn::Polynomial { coeffs: vec![0.1, 0.9] },
                ..base_scenario(StudyKind::Clt)
            };
            let (report, _) = run_clt_study(&scenario).unwrap();
            report.coverage.unwrap()[1].sd_z
        };
        // z is noise-standardized, so sd_z is sigma-invariant and near 1
        let coarse = run(0.4);
        let fine = run(0.04);
        assert!((coarse / fine - 1.0).abs() < 0.05, "{coarse} vs {fine}");
        assert!((coarse - 1.0).abs() < 0.15, "{coarse}");
    }

    #[test]
    fn low_degree_grid_outside_correction_domain_is_rejected() {
        // p = 0, m = 2, K_n = 4: the correction exists only on [0, 0.5],
        // while the default grid reaches 0.8
        let scenario = SimScenario {
            replications: 200,
            p: 0,
            m: 2,
            n: Some(400),
            kn: Some(4),
            ..base_scenario(StudyKind::Bias)
        };
        assert!(matches!(
            run_bias_study(&scenario),
            Err(LabError::GridOutsideCorrectionDomain { .. })
        ));
    }

    #[test]
    fn rate_study_guards() {
        let mut scenario = base_scenario(StudyKind::Rate);
        scenario.smoothing = Smoothing::RateTuned { c: 0.3, gamma: 0.45 };
        scenario.ladder = Some(vec![400, 800]);
        assert!(matches!(run_rate_study(&scenario), Err(LabError::LadderTooShort(2))));
        scenario.ladder = Some(vec![400, 800, 1600, 3200]);
        scenario.smoothing = Smoothing::Alpha { value: 1e-4 };
        assert!(matches!(run_rate_study(&scenario), Err(LabError::NeedsRateTuning)));
    }

    #[test]
    fn reports_are_bit_identical_across_thread_counts() {
        let scenario =
            SimScenario { replications: 16, ..base_scenario(StudyKind::Equivalence) };
        let run_with = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run_equivalence_study(&scenario).unwrap().0.to_json())
        };
        let single = run_with(1);
        let quad = run_with(4);
        assert_eq!(single, quad);
        // and across repeated runs
        assert_eq!(single, run_with(1));
    }

    #[test]
    fn anderson_darling_is_small_for_normal_like_input() {
        // deterministic normal scores via the inverse CDF
        let normal = Normal::new(0.0, 1.0).unwrap();
        let z: Vec<f64> =
            (1..=500).map(|i| normal.inverse_cdf((i as f64 - 0.5) / 500.0)).collect();
        let a2 = anderson_darling(&z);
        assert!(a2 < 0.4, "{a2}");
        // a shifted sample is far from standard normal
        let shifted: Vec<f64> = z.iter().map(|v| v + 1.5).collect();
        assert!(anderson_darling(&shifted) > 10.0);
    }

    #[test]
    fn least_squares_recovers_line() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.5 - 0.8 * v).collect();
        let fit = least_squares(&x, &y);
        assert!((fit.slope + 0.8).abs() < 1e-12);
        assert!((fit.intercept - 2.5).abs() < 1e-12);
        assert!(fit.slope_se < 1e-12);
    }
}
