//! Difference matrices `D_m`, the cumulative-sum matrix `C`, and the row
//! structure of `C^k D_m^T D_m`.
//!
//! The identity checks double as library diagnostics: `certify` re-runs
//! them on seeded random data so the CLI can print a certification
//! report instead of burying the structure results in unit tests.

use crate::linalg::BandedSymmetric;
use crate::CertCheck;
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PenaltyError {
    #[error("difference order {order} must satisfy 1 <= order < dim (dim = {dim})")]
    InvalidOrder { order: usize, dim: usize },
    #[error("row coefficients need 0 <= k <= m (k = {k}, m = {m})")]
    UnsupportedPower { k: usize, m: usize },
}

/// Binomial coefficient in f64 (exact for the small orders used here).
pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut num = 1.0;
    let mut den = 1.0;
    for i in 0..k {
        num *= (n - i) as f64;
        den *= (i + 1) as f64;
    }
    num / den
}

/// The m-th order difference matrix: row `r` applied to `b` yields
/// `Delta^m b_{m+1+r}` with the usual signed binomial weights.
#[derive(Debug, Clone)]
pub struct DifferenceMatrix {
    order: usize,
    cols: usize,
    entries: Array2<f64>,
}

impl DifferenceMatrix {
    pub fn new(order: usize, dim: usize) -> Result<Self, PenaltyError> {
        if order == 0 || order >= dim {
            return Err(PenaltyError::InvalidOrder { order, dim });
        }
        let rows = dim - order;
        let mut entries = Array2::zeros((rows, dim));
        for r in 0..rows {
            for j in 0..=order {
                entries[(r, r + j)] = sign(order - j) * binomial(order, j);
            }
        }
        Ok(Self { order, cols: dim, entries })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.cols);
        self.entries
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(b).map(|(e, v)| e * v).sum())
            .collect()
    }

    /// The banded Gram matrix `D_m^T D_m` used by the fitter.
    pub fn gram_banded(&self) -> BandedSymmetric {
        let mut gram = BandedSymmetric::zeros(self.cols, self.order);
        for r in 0..self.entries.nrows() {
            for a in 0..=self.order {
                for b in 0..=a {
                    gram.add(
                        r + a,
                        r + b,
                        self.entries[(r, r + a)] * self.entries[(r, r + b)],
                    );
                }
            }
        }
        gram
    }
}

fn sign(k: usize) -> f64 {
    if k % 2 == 0 { 1.0 } else { -1.0 }
}

/// Lower-triangular matrix of ones (cumulative sums).
#[derive(Debug, Clone, Copy)]
pub struct CumSumMatrix {
    size: usize,
}

impl CumSumMatrix {
    pub fn new(size: usize) -> Self {
        Self { size }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn matrix(&self) -> Array2<f64> {
        let mut c = Array2::zeros((self.size, self.size));
        for i in 0..self.size {
            for j in 0..=i {
                c[(i, j)] = 1.0;
            }
        }
        c
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut acc = 0.0;
        v.iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect()
    }
}

/// Interior-row coefficients `(omega_0, ..., omega_{2m-k})` of
/// `C^k D_m^T D_m`: `omega_j = (-1)^m (-1)^{2m-k-j} binom(2m-k, j)`.
pub fn omega_row_coeffs(m: usize, k: usize) -> Result<Vec<f64>, PenaltyError> {
    if k > m {
        return Err(PenaltyError::UnsupportedPower { k, m });
    }
    let width = 2 * m - k;
    Ok((0..=width)
        .map(|j| sign(m) * sign(width - j) * binomial(width, j))
        .collect())
}

/// Check `C^m D_m^T D_m b = (-1)^m (Delta^m b_{m+1}, ..., Delta^m b_dim,
/// 0, ..., 0)` within `1e-10`, by brute-force matrix products.
pub fn check_cm_identity(m: usize, dim: usize, b: &[f64]) -> bool {
    cm_identity_error(m, dim, b).map(|e| e < 1e-10).unwrap_or(false)
}

/// Worst entry deviation of the same identity (diagnostic form).
pub fn cm_identity_error(m: usize, dim: usize, b: &[f64]) -> Result<f64, PenaltyError> {
    if b.len() != dim {
        return Err(PenaltyError::InvalidOrder { order: m, dim });
    }
    let d = DifferenceMatrix::new(m, dim)?;
    let c = CumSumMatrix::new(dim);
    // left side: C^m (D^T (D b))
    let db = d.apply(b);
    let mut left: Vec<f64> = (0..dim)
        .map(|col| (0..db.len()).map(|r| d.entries[(r, col)] * db[r]).sum())
        .collect();
    for _ in 0..m {
        left = c.apply(&left);
    }
    // right side: (-1)^m differences padded with m zeros
    let mut right = vec![0.0; dim];
    for (r, v) in db.iter().enumerate() {
        right[r] = sign(m) * v;
    }
    Ok(left
        .iter()
        .zip(&right)
        .map(|(l, r)| (l - r).abs())
        .fold(0.0, f64::max))
}

/// Certification report for the structural identities at order `m`.
pub fn certify(m: usize, dim: usize, trials: usize, seed: u64) -> Vec<CertCheck> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..trials {
        let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if let Ok(err) = cm_identity_error(m, dim, &b) {
            worst = worst.max(err);
        } else {
            worst = f64::INFINITY;
        }
    }
    checks.push(CertCheck {
        name: format!("cumulative-difference identity, m={m}, dim={dim}, {trials} random draws"),
        max_error: worst,
        tolerance: crate::tolerances::CM_IDENTITY,
    });

    checks.push(CertCheck {
        name: format!("interior rows of C^k D_m^T D_m match omega coefficients, m={m}"),
        max_error: (0..=m)
            .map(|k| omega_row_error(m, k, dim))
            .fold(0.0, f64::max),
        tolerance: crate::tolerances::CM_IDENTITY,
    });

    let annihilation = (0..m)
        .map(|q| {
            let b: Vec<f64> = (1..=dim).map(|i| (i as f64).powi(q as i32)).collect();
            let scale = b.last().copied().unwrap_or(1.0).max(1.0);
            DifferenceMatrix::new(m, dim)
                .map(|d| d.apply(&b).iter().fold(0.0f64, |acc, v| acc.max(v.abs())) / scale)
                .unwrap_or(f64::INFINITY)
        })
        .fold(0.0, f64::max);
    checks.push(CertCheck {
        name: format!("D_{m} annihilates polynomial sequences of degree < {m}"),
        max_error: annihilation,
        tolerance: crate::tolerances::ANNIHILATION_REL,
    });

    checks
}

/// Worst deviation between the brute-force interior rows of
/// `C^k D_m^T D_m` and the closed-form omega coefficients.
pub fn omega_row_error(m: usize, k: usize, dim: usize) -> f64 {
    let omega = match omega_row_coeffs(m, k) {
        Ok(o) => o,
        Err(_) => return f64::INFINITY,
    };
    let d = match DifferenceMatrix::new(m, dim) {
        Ok(d) => d,
        Err(_) => return f64::INFINITY,
    };
    let c = CumSumMatrix::new(dim).matrix();
    let mut product = d.entries.t().dot(d.entries());
    for _ in 0..k {
        product = c.dot(&product);
    }
    // interior rows: skip the first m-k and last m rows (1-based row i,
    // band starts at column i - m + k - 1, 0-based)
    let mut worst = 0.0f64;
    for i in (m - k)..(dim - m) {
        let band_start = i as i64 - (m - k) as i64;
        for col in 0..dim {
            let offset = col as i64 - band_start;
            let want = if (0..=(2 * m - k) as i64).contains(&offset) {
                omega[offset as usize]
            } else {
                0.0
            };
            worst = worst.max((product[(i, col)] - want).abs());
        }
    }
    worst
}
