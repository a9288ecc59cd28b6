//! Small dense and banded linear algebra used by the fitter and the
//! kernel/boundary coefficient systems.
//!
//! The systems here are either tiny (at most `2m x 2m` trigonometric
//! matrices) or banded symmetric positive definite (the penalized normal
//! equations, bandwidth `max(p, m)`), so hand-rolled factorizations are
//! both simpler and faster than a general-purpose backend.

use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is numerically singular at pivot {pivot} (|pivot| = {magnitude:.3e})")]
    Singular { pivot: usize, magnitude: f64 },
    #[error("matrix is not positive definite at pivot {pivot} (value {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("dimension mismatch: matrix is {rows}x{cols}, vector has length {len}")]
    DimensionMismatch { rows: usize, cols: usize, len: usize },
}

/// Solve the dense square system `a x = b` by LU with partial pivoting.
///
/// `a` is consumed as workspace. Intended for the small coefficient
/// systems (dimension at most a few dozen).
pub fn lu_solve(mut a: Array2<f64>, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(LinalgError::DimensionMismatch {
            rows: a.nrows(),
            cols: a.ncols(),
            len: b.len(),
        });
    }
    let mut x = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();

    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_mag = a[(col, col)].abs();
        for r in col + 1..n {
            let mag = a[(r, col)].abs();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = r;
            }
        }
        if pivot_mag == 0.0 || !pivot_mag.is_finite() {
            return Err(LinalgError::Singular {
                pivot: col,
                magnitude: pivot_mag,
            });
        }
        if pivot_row != col {
            for c in 0..n {
                let tmp = a[(col, c)];
                a[(col, c)] = a[(pivot_row, c)];
                a[(pivot_row, c)] = tmp;
            }
            x.swap(col, pivot_row);
            perm.swap(col, pivot_row);
        }
        let inv = 1.0 / a[(col, col)];
        for r in col + 1..n {
            let factor = a[(r, col)] * inv;
            a[(r, col)] = factor;
            for c in col + 1..n {
                a[(r, c)] -= factor * a[(col, c)];
            }
            x[r] -= factor * x[col];
        }
    }
    // back substitution
    for col in (0..n).rev() {
        x[col] /= a[(col, col)];
        for r in 0..col {
            let factor = a[(r, col)];
            x[r] -= factor * x[col];
        }
    }
    Ok(x)
}

/// Infinity-norm condition estimate via `||A||_inf * ||A^{-1}||_inf`,
/// with the inverse norm taken over the solved unit basis. Only meant
/// for the small boundary systems, where an exact inverse is cheap.
pub fn condition_inf(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let norm_a = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut norm_inv: f64 = 0.0;
    let mut inv_rows = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        match lu_solve(a.clone(), &e) {
            Ok(col) => {
                for i in 0..n {
                    inv_rows[i][j] = col[i];
                }
            }
            Err(_) => return f64::INFINITY,
        }
    }
    for row in &inv_rows {
        norm_inv = norm_inv.max(row.iter().map(|v| v.abs()).sum());
    }
    norm_a * norm_inv
}

/// Symmetric banded matrix, lower storage: entry `(i, j)` with
/// `j <= i <= j + bandwidth` lives at `data[i * (bandwidth + 1) + (i - j)]`.
#[derive(Debug, Clone)]
pub struct BandedSymmetric {
    dim: usize,
    bandwidth: usize,
    data: Vec<f64>,
}

impl BandedSymmetric {
    pub fn zeros(dim: usize, bandwidth: usize) -> Self {
        Self {
            dim,
            bandwidth,
            data: vec![0.0; dim * (bandwidth + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        if hi - lo > self.bandwidth {
            0.0
        } else {
            self.data[hi * (self.bandwidth + 1) + (hi - lo)]
        }
    }

    /// Add `value` at `(i, j)`; only the lower triangle is stored, so
    /// callers must touch each unordered pair once.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(hi - lo <= self.bandwidth);
        self.data[hi * (self.bandwidth + 1) + (hi - lo)] += value;
    }

    /// `y = A x` for the full symmetric matrix.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let lo = i.saturating_sub(self.bandwidth);
            let mut acc = 0.0;
            for j in lo..i {
                let a = self.data[i * (self.bandwidth + 1) + (i - j)];
                acc += a * x[j];
                y[j] += a * x[i];
            }
            acc += self.data[i * (self.bandwidth + 1)] * x[i];
            y[i] += acc;
        }
        y
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.dim, self.dim));
        for i in 0..self.dim {
            for j in i.saturating_sub(self.bandwidth)..=i {
                let v = self.get(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }
}

/// Cholesky factor of a banded SPD matrix, same band structure.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    dim: usize,
    bandwidth: usize,
    // lower factor, same layout as BandedSymmetric
    data: Vec<f64>,
}

impl BandedCholesky {
    /// Factor `a = L L^T`. Fails with the offending pivot index when the
    /// matrix is not positive definite.
    pub fn new(a: &BandedSymmetric) -> Result<Self, LinalgError> {
        let n = a.dim;
        let bw = a.bandwidth;
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut sum = a.get(i, j);
                let kmin = j.saturating_sub(bw).max(lo);
                for k in kmin..j {
                    sum -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if j == i {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(LinalgError::NotPositiveDefinite { pivot: i, value: sum });
                    }
                    l[i * w + 0] = sum.sqrt();
                } else {
                    l[i * w + (i - j)] = sum / l[j * w + 0];
                }
            }
        }
        Ok(Self {
            dim: n,
            bandwidth: bw,
            data: l,
        })
    }

    /// Solve `A x = b` given the factorization.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let bw = self.bandwidth;
        let w = bw + 1;
        let mut x = b.to_vec();
        // forward: L y = b
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut sum = x[i];
            for j in lo..i {
                sum -= self.data[i * w + (i - j)] * x[j];
            }
            x[i] = sum / self.data[i * w];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut sum = x[i];
            for j in i + 1..=hi {
                sum -= self.data[j * w + (j - i)] * x[j];
            }
            x[i] = sum / self.data[i * w];
        }
        x
    }
}

/// Solve a banded SPD system with iterative refinement until the
/// relative residual (infinity norms) drops below `1e-13` or stalls.
pub fn solve_refined(
    a: &BandedSymmetric,
    chol: &BandedCholesky,
    b: &[f64],
) -> Vec<f64> {
    let norm_b = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut x = chol.solve(b);
    for _ in 0..3 {
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
        let norm_r = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm_r <= 1e-13 * norm_b {
            break;
        }
        let dx = chol.solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn lu_solves_small_system() {
        let a = array![[2.0, 1.0], [1.0, 3.0]];
        let x = lu_solve(a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14);
        assert!((x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn lu_reports_singularity() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        match lu_solve(a, &[1.0, 2.0]) {
            Err(LinalgError::Singular { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn banded_cholesky_matches_dense_solve() {
        // pentadiagonal SPD: 6 I + second-difference gram
        let n = 12;
        let mut a = BandedSymmetric::zeros(n, 2);
        for i in 0..n {
            a.add(i, i, 7.0);
            if i + 1 < n {
                a.add(i + 1, i, -4.0);
            }
            if i + 2 < n {
                a.add(i + 2, i, 1.0);
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.5).collect();
        let chol = BandedCholesky::new(&a).unwrap();
        let x = solve_refined(&a, &chol, &b);
        let dense = a.to_dense();
        let x_dense = lu_solve(dense, &b).unwrap();
        for (u, v) in x.iter().zip(&x_dense) {
            assert!((u - v).abs() < 1e-10, "{u} vs {v}");
        }
        // residual at refinement accuracy
        let ax = a.matvec(&x);
        let res = b
            .iter()
            .zip(&ax)
            .map(|(bi, axi)| (bi - axi).abs())
            .fold(0.0f64, f64::max);
        assert!(res < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = BandedSymmetric::zeros(3, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, -2.0);
        a.add(2, 2, 1.0);
        match BandedCholesky::new(&a) {
            Err(LinalgError::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn matvec_matches_dense() {
        let n = 9;
        let mut a = BandedSymmetric::zeros(n, 3);
        for i in 0..n {
            for j in i.saturating_sub(3)..=i {
                a.add(i, j, ((i * 7 + j * 3) % 5) as f64 + if i == j { 10.0 } else { 0.0 });
            }
        }
        let x: Vec<f64> = (0..n).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let y = a.matvec(&x);
        let dense = a.to_dense();
        for i in 0..n {
            let want: f64 = (0..n).map(|j| dense[(i, j)] * x[j]).sum();
            assert!((y[i] - want).abs() < 1e-13);
        }
    }
}
