//! B-spline bases of degree `p` on the equally spaced knots
//! `kappa_j = j / K_n` over `[0, 1]`.
//!
//! The basis is the uniform (cardinal) one: knots continue with the same
//! spacing outside `[0, 1]`, and the `K_n + p` functions whose support
//! meets `(0, 1)` are kept, indexed `k = 1..K_n+p` with support
//! `[kappa_{k-p-1}, kappa_k]`. This choice keeps the partition of unity
//! and the uniform derivative rule `d/dx sum b_k B_k = K_n sum (Delta b_k)
//! B_{k-1}` exact on the whole interval, boundaries included.
//!
//! Evaluation at a knot uses the left limit (half-open intervals
//! `(kappa_{d}, kappa_{d+1}]`), except at `x = 0` where only the right
//! limit exists. Only degree-`p` derivatives and degree-0 bases are
//! discontinuous, so the convention is invisible for smooth quantities.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BasisError {
    #[error("evaluation point {0} is outside [0, 1]")]
    DomainError(f64),
    #[error("number of knot intervals must be positive")]
    EmptyGrid,
    #[error("degree {0} is not supported (maximum 10)")]
    UnsupportedDegree(usize),
    #[error("derivative order {order} is invalid for degree {degree} (need 1 <= order <= degree)")]
    InvalidDerivativeOrder { order: usize, degree: usize },
    #[error("coefficient vector has length {got}, basis dimension is {want}")]
    CoefficientLength { got: usize, want: usize },
}

/// Equally spaced knot layout `kappa_j = j / K_n` and a spline degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnotGrid {
    num_intervals: usize,
    degree: usize,
}

impl KnotGrid {
    pub fn new(num_intervals: usize, degree: usize) -> Result<Self, BasisError> {
        if num_intervals == 0 {
            return Err(BasisError::EmptyGrid);
        }
        if degree > 10 {
            return Err(BasisError::UnsupportedDegree(degree));
        }
        Ok(Self { num_intervals, degree })
    }

    pub fn num_intervals(&self) -> usize {
        self.num_intervals
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Basis dimension `K_n + p`.
    pub fn dim(&self) -> usize {
        self.num_intervals + self.degree
    }

    /// Knot position for any (possibly out-of-range) index.
    pub fn knot(&self, j: i64) -> f64 {
        j as f64 / self.num_intervals as f64
    }

    /// Index `d` of the interval owning `x` under the left-limit
    /// convention: `x in (kappa_d, kappa_{d+1}]` for `x > 0`, `d = 0`
    /// at `x = 0`.
    pub fn interval_index(&self, x: f64) -> usize {
        let s = x * self.num_intervals as f64;
        let mut d = s.ceil() as usize;
        if d > 0 {
            d -= 1;
        }
        d.min(self.num_intervals - 1)
    }

    /// The `p + 1` basis values that can be nonzero at `x`, together with
    /// the 0-based index of the first one. Index `k` (0-based) holds
    /// `B_{k+1}(x)` of the 1-based indexing above.
    pub fn active_basis(&self, x: f64) -> Result<(usize, Vec<f64>), BasisError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(BasisError::DomainError(x));
        }
        let d = self.interval_index(x);
        let u = x * self.num_intervals as f64 - d as f64;
        Ok((d, local_basis(self.degree, u)))
    }

    /// All `K_n + p` basis values at `x`.
    pub fn eval_basis(&self, x: f64) -> Result<Vec<f64>, BasisError> {
        let (start, local) = self.active_basis(x)?;
        let mut out = vec![0.0; self.dim()];
        for (offset, value) in local.iter().enumerate() {
            out[start + offset] = *value;
        }
        Ok(out)
    }
}

/// Values of the `p + 1` active uniform B-splines on the interval that
/// owns the point, in the local coordinate `u in [0, 1]`.
///
/// Triangular Cox–de Boor recurrence; with unit knot spacing the
/// inner weights depend only on `u` and the offset.
fn local_basis(degree: usize, u: f64) -> Vec<f64> {
    let mut w = vec![0.0; degree + 1];
    w[0] = 1.0;
    for q in 1..=degree {
        let qf = q as f64;
        // ascend in-place from the degree q-1 values; go right to left
        for i in (0..=q).rev() {
            let left = if i > 0 { (u + qf - i as f64) * w[i - 1] } else { 0.0 };
            let right = if i < q { (1.0 + i as f64 - u) * w[i] } else { 0.0 };
            w[i] = (left + right) / qf;
        }
    }
    w
}

/// A spline `x -> sum_k b_k B_k(x)` on a [`KnotGrid`].
#[derive(Debug, Clone)]
pub struct SplineFunction {
    grid: KnotGrid,
    coeffs: Vec<f64>,
}

impl SplineFunction {
    pub fn new(grid: KnotGrid, coeffs: Vec<f64>) -> Result<Self, BasisError> {
        if coeffs.len() != grid.dim() {
            return Err(BasisError::CoefficientLength { got: coeffs.len(), want: grid.dim() });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &KnotGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: f64) -> Result<f64, BasisError> {
        let (start, local) = self.grid.active_basis(x)?;
        Ok(local
            .iter()
            .enumerate()
            .map(|(offset, basis)| basis * self.coeffs[start + offset])
            .sum())
    }

    /// `order`-th derivative via the coefficient-difference rule:
    /// differencing `b` `order` times with factor `K_n` per step and
    /// evaluating on the degree `p - order` basis.
    pub fn eval_derivative(&self, order: usize, x: f64) -> Result<f64, BasisError> {
        let p = self.grid.degree;
        if order == 0 || order > p {
            return Err(BasisError::InvalidDerivativeOrder { order, degree: p });
        }
        let scale = self.grid.num_intervals as f64;
        let mut coeffs = self.coeffs.clone();
        for _ in 0..order {
            let len = coeffs.len() - 1;
            for j in 0..len {
                coeffs[j] = scale * (coeffs[j + 1] - coeffs[j]);
            }
            coeffs.truncate(len);
        }
        let lower = KnotGrid::new(self.grid.num_intervals, p - order).expect("degree shrank");
        SplineFunction::new(lower, coeffs)?.eval(x)
    }
}

/// Dense design matrix `[B_k(x_i)]`, row per point.
pub fn design_matrix(grid: &KnotGrid, points: &[f64]) -> Result<ndarray::Array2<f64>, BasisError> {
    let mut m = ndarray::Array2::zeros((points.len(), grid.dim()));
    for (row, &x) in points.iter().enumerate() {
        let (start, local) = grid.active_basis(x)?;
        for (offset, value) in local.iter().enumerate() {
            m[(row, start + offset)] = *value;
        }
    }
    Ok(m)
}

/// Design matrix in banded row form: each row stores the first active
/// column and the `p + 1` active values. This is what the fitter and the
/// simulation lab use; rows ~ n, columns ~ K_n + p.
#[derive(Debug, Clone)]
pub struct BandedDesign {
    dim: usize,
    band: usize,
    starts: Vec<usize>,
    values: Vec<f64>,
}

impl BandedDesign {
    pub fn new(grid: &KnotGrid, points: &[f64]) -> Result<Self, BasisError> {
        let band = grid.degree + 1;
        let mut starts = Vec::with_capacity(points.len());
        let mut values = Vec::with_capacity(points.len() * band);
        for &x in points {
            let (start, local) = grid.active_basis(x)?;
            starts.push(start);
            values.extend_from_slice(&local);
        }
        Ok(Self { dim: grid.dim(), band, starts, values })
    }

    pub fn num_rows(&self) -> usize {
        self.starts.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> (usize, &[f64]) {
        (self.starts[i], &self.values[i * self.band..(i + 1) * self.band])
    }

    /// Accumulate `X^T X` into banded symmetric storage.
    pub fn normal_matrix(&self, out: &mut crate::linalg::BandedSymmetric) {
        for i in 0..self.num_rows() {
            let (start, vals) = self.row(i);
            for a in 0..self.band {
                for b in 0..=a {
                    out.add(start + a, start + b, vals[a] * vals[b]);
                }
            }
        }
    }

    /// `X^T y`.
    pub fn rhs(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for i in 0..self.num_rows() {
            let (start, vals) = self.row(i);
            let yi = y[i];
            for (offset, v) in vals.iter().enumerate() {
                out[start + offset] += v * yi;
            }
        }
        out
    }

    /// Fitted value of row `i` under coefficients `coeffs`.
    pub fn row_dot(&self, i: usize, coeffs: &[f64]) -> f64 {
        let (start, vals) = self.row(i);
        vals.iter()
            .enumerate()
            .map(|(offset, v)| v * coeffs[start + offset])
            .sum()
    }
}
