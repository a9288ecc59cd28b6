//! The interior equivalent kernel of penalized smoothing: the Green's
//! function of `(-1)^m alpha F^(2m) + F = G` on the line.
//!
//! For even `m` the kernel is `K(t, s) = L(|t - s|)` with
//! `L(t) = sum_k beta e^{-beta mu_k t} [c_k cos(omega_k beta t) + d_k
//! sin(omega_k beta t)]`; odd `m` adds a pure-exponential mode
//! `c_0 beta e^{-beta t}`. The decay/oscillation pairs `(mu_k, omega_k)`
//! come from the characteristic roots, and the coefficients solve a
//! small trigonometric linear system whose rows are first rows of powers
//! of the rotation generators `A_k`. Powers of `A_k` are rotations, so
//! every entry is computed by angle arithmetic rather than matrix
//! products; the matrix-product route is kept as the independent check
//! in the certificates.

use crate::dd::{gauss_legendre_dd, Dd, DD_PI};
use crate::quad;
use crate::CertCheck;
use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("penalty order {0} is not supported (need 1 <= m <= 12)")]
    UnsupportedOrder(usize),
    #[error("coefficient system residual {residual:.3e} exceeds 1e-12 for m = {m}")]
    SolveFailure { m: usize, residual: f64 },
    #[error("bandwidth parameter beta must be positive, got {0}")]
    InvalidBeta(f64),
}

pub const MAX_ORDER: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

pub fn parity_of(m: usize) -> Parity {
    if m % 2 == 0 { Parity::Even } else { Parity::Odd }
}

/// One oscillatory characteristic mode: decay `mu = cos(phi)`,
/// frequency `omega = sin(phi)`.
#[derive(Debug, Clone, Copy)]
pub struct EigenMode {
    pub mu: f64,
    pub omega: f64,
    /// characteristic angle; the rotation generator of the mode is
    /// `A = M(pi - phi)`, and `-A = M(-phi)`
    pub phi: f64,
}

impl EigenMode {
    /// Generator angle: `A = M(theta)`.
    pub fn theta(&self) -> f64 {
        std::f64::consts::PI - self.phi
    }
}

/// Decay/oscillation components of the `2m` characteristic roots that
/// matter on `t >= 0`: `m/2` oscillatory pairs for even `m`, or
/// `(m-1)/2` pairs plus the pure-real root for odd `m`.
#[derive(Debug, Clone)]
pub struct EigenComponents {
    pub m: usize,
    pub parity: Parity,
    pub modes: Vec<EigenMode>,
    pub has_real_mode: bool,
}

pub fn eigen_components(m: usize) -> Result<EigenComponents, KernelError> {
    if m == 0 || m > MAX_ORDER {
        return Err(KernelError::UnsupportedOrder(m));
    }
    let parity = parity_of(m);
    let modes = match parity {
        Parity::Even => (0..m / 2)
            .map(|k| {
                let phi = (2 * k + 1) as f64 * std::f64::consts::PI / (2 * m) as f64;
                EigenMode { mu: phi.cos(), omega: phi.sin(), phi }
            })
            .collect(),
        Parity::Odd => (1..=(m - 1) / 2)
            .map(|k| {
                let phi = k as f64 * std::f64::consts::PI / m as f64;
                EigenMode { mu: phi.cos(), omega: phi.sin(), phi }
            })
            .collect(),
    };
    Ok(EigenComponents { m, parity, modes, has_real_mode: parity == Parity::Odd })
}

/// The 2x2 generator `A_k = [[-mu, omega], [-omega, -mu]]` of a mode;
/// a rotation by `theta = pi - phi`, so `A_k^j = M(j theta)`.
#[derive(Debug, Clone, Copy)]
pub struct RotationGenerator {
    pub index: usize,
    pub mode: EigenMode,
}

impl RotationGenerator {
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[-self.mode.mu, self.mode.omega], [-self.mode.omega, -self.mode.mu]]
    }

    /// `A_k^j` by angle multiplication (exact up to one trig call).
    pub fn power(&self, j: i64) -> [[f64; 2]; 2] {
        rotation(j as f64 * self.mode.theta())
    }
}

/// `M(angle)` = [[cos, sin], [-sin, cos]].
pub(crate) fn rotation(angle: f64) -> [[f64; 2]; 2] {
    let (s, c) = angle.sin_cos();
    [[c, s], [-s, c]]
}

fn mat_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// `A^j` by repeated multiplication; the slow, independent route used
/// only inside certificates.
fn matrix_power(a: [[f64; 2]; 2], j: usize) -> [[f64; 2]; 2] {
    let mut out = [[1.0, 0.0], [0.0, 1.0]];
    for _ in 0..j {
        out = mat_mul(out, a);
    }
    out
}

/// One mode of the assembled kernel: eigen components plus its pair of
/// coefficients.
#[derive(Debug, Clone, Copy)]
pub struct KernelMode {
    pub mu: f64,
    pub omega: f64,
    pub phi: f64,
    pub c: f64,
    pub d: f64,
}

/// The interior equivalent kernel with beta-free coefficients; `beta`
/// enters only at evaluation.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    m: usize,
    parity: Parity,
    modes: Vec<KernelMode>,
    /// coefficient of the pure-exponential mode (odd m)
    real_coeff: Option<f64>,
}

impl KernelSpec {
    pub fn order(&self) -> usize {
        self.m
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn modes(&self) -> &[KernelMode] {
        &self.modes
    }

    pub fn real_coeff(&self) -> Option<f64> {
        self.real_coeff
    }

    /// Slowest decay rate among the modes (the real mode decays at 1).
    pub fn min_decay(&self) -> f64 {
        self.modes.iter().map(|md| md.mu).fold(1.0, f64::min)
    }

    /// `L(tau)` (even m) or `P(tau)` (odd m) at scale `beta`.
    pub fn value(&self, beta: f64, tau: f64) -> f64 {
        let tau = tau.abs();
        let mut acc = 0.0;
        for md in &self.modes {
            let phase = md.omega * beta * tau;
            acc += (-beta * md.mu * tau).exp() * (md.c * phase.cos() + md.d * phase.sin());
        }
        if let Some(c0) = self.real_coeff {
            acc += c0 * (-beta * tau).exp();
        }
        beta * acc
    }

    /// j-th derivative of `L` (resp. `P`) at `tau >= 0`, by the mode
    /// decomposition: each mode advances by `j` times its generator
    /// angle.
    pub fn derivative(&self, beta: f64, j: usize, tau: f64) -> f64 {
        let mut acc = 0.0;
        for md in &self.modes {
            let angle = j as f64 * (std::f64::consts::PI - md.phi) + md.omega * beta * tau;
            acc += (-beta * md.mu * tau).exp() * (md.c * angle.cos() + md.d * angle.sin());
        }
        if let Some(c0) = self.real_coeff {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * c0 * (-beta * tau).exp();
        }
        beta.powi(j as i32 + 1) * acc
    }
}

/// Assemble the trigonometric coefficient system: row per odd
/// derivative order `j = 1, 3, ..., 2m-1`, columns per coefficient in
/// the order `(c_0, d_0, ...)` (even) or `(c_0, c_1, d_1, ...)` (odd).
pub fn assemble_coefficient_system(m: usize) -> Result<(Array2<f64>, Vec<f64>), KernelError> {
    let eigen = eigen_components(m)?;
    let mut a = Array2::zeros((m, m));
    for (row, j) in (0..m).map(|i| (i, (2 * i + 1) as f64)) {
        let mut col = 0;
        if eigen.has_real_mode {
            a[(row, col)] = -1.0; // odd derivative of e^{-t} at 0
            col += 1;
        }
        for md in &eigen.modes {
            let angle = j * md.theta();
            a[(row, col)] = angle.cos();
            a[(row, col + 1)] = angle.sin();
            col += 2;
        }
    }
    let mut rhs = vec![0.0; m];
    rhs[m - 1] = match eigen.parity {
        Parity::Even => 0.5,
        Parity::Odd => -0.5,
    };
    Ok((a, rhs))
}

/// Solve the coefficient system.
///
/// Internally works in double-double through the orthogonality of the
/// system (normal equations with an exactly diagonal Gram matrix), so
/// the stored f64 coefficients are correctly rounded; the moment
/// certificates need that headroom. The f64-assembled system residual
/// is still verified to meet the 1e-12 contract.
pub fn solve_kernel_coefficients(m: usize) -> Result<KernelSpec, KernelError> {
    let eigen = eigen_components(m)?;
    let ncols = m;
    // double-double column entries: col(j-row) for odd j
    let rows: Vec<f64> = (0..m).map(|i| (2 * i + 1) as f64).collect();
    let mut columns: Vec<Vec<Dd>> = Vec::with_capacity(ncols);
    if eigen.has_real_mode {
        columns.push(rows.iter().map(|_| Dd::from(-1.0)).collect());
    }
    for (idx, _) in eigen.modes.iter().enumerate() {
        let theta = mode_theta_dd(&eigen, idx);
        let cos_col: Vec<Dd> =
            rows.iter().map(|j| (theta * *j).sin_cos().1).collect();
        let sin_col: Vec<Dd> =
            rows.iter().map(|j| (theta * *j).sin_cos().0).collect();
        columns.push(cos_col);
        columns.push(sin_col);
    }
    let rhs_last = match eigen.parity {
        Parity::Even => Dd::from(0.5),
        Parity::Odd => Dd::from(-0.5),
    };
    // Normal equations: the Gram matrix of the columns is diagonal
    // (the columns are exactly orthogonal), so x_c = <col_c, rhs> / ||col_c||^2,
    // and <col_c, rhs> only sees the last row.
    let mut solution = Vec::with_capacity(ncols);
    for col in &columns {
        let mut gram = Dd::ZERO;
        for v in col {
            gram = gram + *v * *v;
        }
        let proj = col[m - 1] * rhs_last;
        solution.push((proj / gram).to_f64());
    }

    // verify against the f64-assembled system
    let (a, rhs) = assemble_coefficient_system(m)?;
    let mut residual = 0.0f64;
    for r in 0..m {
        let mut acc = -rhs[r];
        for c in 0..m {
            acc += a[(r, c)] * solution[c];
        }
        residual = residual.max(acc.abs());
    }
    if residual > 1e-12 {
        return Err(KernelError::SolveFailure { m, residual });
    }

    let mut iter = solution.into_iter();
    let real_coeff = if eigen.has_real_mode { iter.next() } else { None };
    let modes = eigen
        .modes
        .iter()
        .map(|md| {
            let c = iter.next().expect("coefficient count");
            let d = iter.next().expect("coefficient count");
            KernelMode { mu: md.mu, omega: md.omega, phi: md.phi, c, d }
        })
        .collect();
    Ok(KernelSpec { m, parity: eigen.parity, modes, real_coeff })
}

/// Generator angle of mode `idx` in double-double: `pi - phi`.
fn mode_theta_dd(eigen: &EigenComponents, idx: usize) -> Dd {
    let numerator = match eigen.parity {
        Parity::Even => (2 * idx + 1) as f64,
        Parity::Odd => (idx + 1) as f64,
    };
    let denominator = match eigen.parity {
        Parity::Even => (2 * eigen.m) as f64,
        Parity::Odd => eigen.m as f64,
    };
    DD_PI - DD_PI * numerator / Dd::from(denominator)
}

fn mode_phi_dd(eigen: &EigenComponents, idx: usize) -> Dd {
    let numerator = match eigen.parity {
        Parity::Even => (2 * idx + 1) as f64,
        Parity::Odd => (idx + 1) as f64,
    };
    let denominator = match eigen.parity {
        Parity::Even => (2 * eigen.m) as f64,
        Parity::Odd => eigen.m as f64,
    };
    DD_PI * numerator / Dd::from(denominator)
}

/// `K(t, s) = L(|t - s|)` (even m) or `P(|t - s|)` (odd m).
pub fn eval_kernel(spec: &KernelSpec, beta: f64, t: f64, s: f64) -> f64 {
    spec.value(beta, (t - s).abs())
}

/// Moment `int tau^order K(|tau|) dtau` at `beta = 1`, by composite
/// Gauss-Legendre quadrature in double-double arithmetic with the
/// truncation point chosen so the exponential tail is below 1e-13.
///
/// Odd orders vanish exactly by symmetry and return 0. Orders are
/// capped at 60: beyond that the per-mode terms (size `order!`) leave
/// no representable digits for a certificate.
pub fn kernel_moment(spec: &KernelSpec, order: usize) -> f64 {
    assert!(order <= 60, "kernel moments are only supported up to order 60, got {order}");
    if order % 2 == 1 {
        return 0.0;
    }
    let eigen = eigen_components(spec.m).expect("spec order already validated");
    let rho = spec.min_decay();
    let coeff_mass: f64 = spec
        .modes
        .iter()
        .map(|md| md.c.abs() + md.d.abs())
        .sum::<f64>()
        + spec.real_coeff.map_or(0.0, f64::abs)
        + 1.0;
    // solve rho T - order ln T >= 13 ln 10 + ln(coeff_mass / rho)
    let target = 13.0 * std::f64::consts::LN_10 + (2.0 * coeff_mass / rho).ln();
    let mut t_end = 40.0f64.max(40.0 / rho);
    for _ in 0..40 {
        t_end = (target + order as f64 * t_end.max(std::f64::consts::E).ln()) / rho;
    }
    let t_end = t_end.max(40.0 / rho).max(40.0).ceil();

    // double-double mode data; coefficients are the stored f64 values
    let mut mu_dd = Vec::new();
    let mut omega_dd = Vec::new();
    let mut c_dd = Vec::new();
    let mut d_dd = Vec::new();
    for (idx, md) in spec.modes.iter().enumerate() {
        let phi = mode_phi_dd(&eigen, idx);
        let (s, c) = phi.sin_cos();
        mu_dd.push(c);
        omega_dd.push(s);
        c_dd.push(Dd::from(md.c));
        d_dd.push(Dd::from(md.d));
    }
    let real_c = spec.real_coeff.map(Dd::from);

    let (nodes, weights) = gauss_legendre_dd(24);
    let panels = t_end as usize;
    let mut total = Dd::ZERO;
    for p in 0..panels {
        let left = Dd::from(p as f64);
        let mid = left + Dd::from(0.5);
        let half = Dd::from(0.5);
        for (x, w) in nodes.iter().zip(&weights) {
            let tau = mid + half * *x;
            let mut val = Dd::ZERO;
            for k in 0..mu_dd.len() {
                let (sn, cs) = (omega_dd[k] * tau).sin_cos();
                val = val + (-(mu_dd[k] * tau)).exp() * (c_dd[k] * cs + d_dd[k] * sn);
            }
            if let Some(c0) = real_c {
                val = val + c0 * (-tau).exp();
            }
            total = total + *w * half * val * tau.powi(order as u32);
        }
    }
    // kernel is even in tau: double the half-line integral
    (total * 2.0).to_f64()
}

/// Result of the kernel variance integral, with a warning when the
/// requested point is too close to the boundary for the interior-limit
/// accuracy.
#[derive(Debug, Clone)]
pub struct SigmaKSquared {
    pub value: f64,
    pub warning: Option<String>,
}

/// `(1/beta) int_0^1 K(t, s)^2 ds`, the variance constant of the kernel
/// sum; converges to a t-free limit for interior `t`.
pub fn sigma_k_squared(spec: &KernelSpec, beta: f64, t: f64) -> Result<SigmaKSquared, KernelError> {
    if beta <= 0.0 {
        return Err(KernelError::InvalidBeta(beta));
    }
    let panels = ((4.0 * beta).ceil() as usize).max(64);
    let value = quad::integrate(
        |s| {
            let k = spec.value(beta, (t - s).abs());
            k * k
        },
        0.0,
        1.0,
        panels,
        16,
    ) / beta;
    let margin = t.min(1.0 - t) * beta;
    let warning = if margin < 20.0 {
        Some(format!(
            "t = {t} is within 20/beta of the boundary (t*beta = {margin:.2}); \
             the interior limit is not reached to 1e-8"
        ))
    } else {
        None
    };
    Ok(SigmaKSquared { value, warning })
}

/// Orthogonality of the assembled system: even m has
/// `A (A)^T = (m/2) I`; odd m has `A^T A` diagonal with positive
/// diagonal. Returns the worst deviation.
pub fn orthogonality_error(m: usize) -> Result<f64, KernelError> {
    let (a, _) = assemble_coefficient_system(m)?;
    let mut worst = 0.0f64;
    match parity_of(m) {
        Parity::Even => {
            let gram = a.dot(&a.t());
            for i in 0..m {
                for j in 0..m {
                    let want = if i == j { m as f64 / 2.0 } else { 0.0 };
                    worst = worst.max((gram[(i, j)] - want).abs());
                }
            }
        }
        Parity::Odd => {
            let gram = a.t().dot(&a);
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        if gram[(i, i)] <= 0.0 {
                            return Ok(f64::INFINITY);
                        }
                    } else {
                        worst = worst.max((gram[(i, j)]).abs());
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// Deviation of the defining derivative conditions at 0, evaluated by
/// repeated 2x2 matrix powers (the route independent of the angle
/// arithmetic used in assembly). Orders `1, 3, ..., 2m-3` must vanish;
/// order `2m-1` must equal `1/2` (even) or `-1/2` (odd) at `beta = 1`.
pub fn defining_conditions_error(spec: &KernelSpec) -> f64 {
    let m = spec.m;
    let mut worst = 0.0f64;
    for (i, j) in (0..m).map(|i| (i, 2 * i + 1)) {
        let mut acc = 0.0;
        for md in &spec.modes {
            let a = [[-md.mu, md.omega], [-md.omega, -md.mu]];
            let aj = matrix_power(a, j);
            acc += aj[0][0] * md.c + aj[0][1] * md.d;
        }
        if let Some(c0) = spec.real_coeff {
            acc -= c0; // odd derivative orders of e^{-t}
        }
        let err = if i + 1 == m {
            let want = match spec.parity {
                Parity::Even => 0.5,
                Parity::Odd => -0.5,
            };
            (acc - want).abs() / 0.5
        } else {
            acc.abs()
        };
        worst = worst.max(err);
    }
    worst
}

/// Deviation of each mode from the homogeneous ODE: generator raised to
/// the `2m` gives `-I` (even) or `I` (odd), again by repeated products.
pub fn ode_membership_error(spec: &KernelSpec) -> f64 {
    let m = spec.m;
    let sign = match spec.parity {
        Parity::Even => -1.0,
        Parity::Odd => 1.0,
    };
    let mut worst = 0.0f64;
    for md in &spec.modes {
        let a = [[-md.mu, md.omega], [-md.omega, -md.mu]];
        let a2m = matrix_power(a, 2 * m);
        for r in 0..2 {
            for c in 0..2 {
                let want = if r == c { sign } else { 0.0 };
                worst = worst.max((a2m[r][c] - want).abs());
            }
        }
    }
    worst
}

/// Identity certificates for the kernel at order `m`.
pub fn certify(m: usize) -> Result<Vec<CertCheck>, KernelError> {
    let spec = solve_kernel_coefficients(m)?;
    let mut checks = vec![
        CertCheck {
            name: format!("coefficient-system orthogonality, m={m}"),
            max_error: orthogonality_error(m)?,
            tolerance: crate::tolerances::SYSTEM_ORTHOGONALITY,
        },
        CertCheck {
            name: format!("defining derivative conditions at 0, m={m}"),
            max_error: defining_conditions_error(&spec),
            tolerance: crate::tolerances::DEFINING_CONDITIONS,
        },
        CertCheck {
            name: format!("homogeneous ODE membership of all modes, m={m}"),
            max_error: ode_membership_error(&spec),
            tolerance: crate::tolerances::ODE_MEMBERSHIP,
        },
    ];
    for order in 0..2 * m {
        let want = if order == 0 { 1.0 } else { 0.0 };
        let value = kernel_moment(&spec, order);
        checks.push(CertCheck {
            name: format!("kernel moment of order {order}, m={m}"),
            max_error: (value - want).abs(),
            tolerance: crate::tolerances::moment_tolerance(m, order),
        });
    }
    Ok(checks)
}
