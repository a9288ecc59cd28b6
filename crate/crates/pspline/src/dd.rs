//! Double-double arithmetic (~31 significant decimal digits).
//!
//! The moment certificates integrate `tau^k * K(tau)` where the absolute
//! mass of the integrand can exceed 1e14 while the exact value is 0; f64
//! quadrature bottoms out near `1e14 * eps ~ 1e-2`, far above the 1e-8
//! certificate tolerance. Evaluating the integrand and the quadrature
//! rule in double-double pushes the floor to the rounding error of the
//! stored kernel coefficients themselves.
//!
//! The algorithms are the standard error-free transformations (Dekker /
//! Knuth two-sum, FMA two-product) plus table-free `exp` and `sin`/`cos`
//! built from argument reduction against double-double constants and
//! truncated Taylor series.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

pub const DD_PI: Dd = Dd { hi: std::f64::consts::PI, lo: 1.2246467991473532e-16 };
pub const DD_PI_2: Dd = Dd { hi: std::f64::consts::FRAC_PI_2, lo: 6.123233995736766e-17 };
pub const DD_LN2: Dd = Dd { hi: std::f64::consts::LN_2, lo: 2.3190468138462996e-17 };

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    // requires |a| >= |b| or a == 0
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let v = s - a;
    (s, (a - (s - v)) + (b - v))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, f64::mul_add(a, b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    fn renorm(hi: f64, lo: f64) -> Dd {
        let (h, l) = quick_two_sum(hi, lo);
        Dd { hi: h, lo: l }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    /// Multiply by an exact power of two.
    #[inline]
    pub fn ldexp(self, n: i32) -> Dd {
        let s = 2.0f64.powi(n);
        Dd { hi: self.hi * s, lo: self.lo * s }
    }

    pub fn powi(self, n: u32) -> Dd {
        let mut base = self;
        let mut n = n;
        let mut acc = Dd::ONE;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            n >>= 1;
        }
        acc
    }

    pub fn recip(self) -> Dd {
        Dd::ONE / self
    }

    /// `e^x` for |x| up to about 700.
    pub fn exp(self) -> Dd {
        if self.hi == 0.0 && self.lo == 0.0 {
            return Dd::ONE;
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        let n = (self.hi / DD_LN2.hi).round();
        let r = self - DD_LN2 * n; // |r| <= ln2/2
        let r = r.ldexp(-9); // /512
        // Taylor on |r| <= 6.8e-4; divide by exact integers to keep
        // full double-double precision in the coefficients
        let mut term = r;
        let mut sum = Dd::ONE + r;
        for k in 2..=12u32 {
            term = term * r / Dd::from(k as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-35 * sum.hi.abs() {
                break;
            }
        }
        // undo the scaling: square 9 times
        for _ in 0..9 {
            sum = sum * sum;
        }
        sum.ldexp(n as i32)
    }

    /// Simultaneous `(sin x, cos x)` for |x| up to about 1e8.
    pub fn sin_cos(self) -> (Dd, Dd) {
        let k = (self.hi / DD_PI_2.hi).round();
        let r = self - DD_PI_2 * k; // |r| <= pi/4 (+ rounding)
        let (s, c) = sin_cos_taylor(r);
        match (k as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }
}

fn sin_cos_taylor(r: Dd) -> (Dd, Dd) {
    let r2 = r * r;
    // sin: r (1 - r^2/6 (1 - ...)) expanded directly
    let mut sin = r;
    let mut term = r;
    let mut k = 1u32;
    loop {
        // next odd term: * (-r^2) / ((2k)(2k+1)), exact-integer divisor
        term = term * r2 / Dd::from(-((2 * k) as f64 * (2 * k + 1) as f64));
        sin = sin + term;
        k += 1;
        if term.hi.abs() < 1e-35 || k > 20 {
            break;
        }
    }
    let mut cos = Dd::ONE;
    let mut termc = Dd::ONE;
    let mut k = 1u32;
    loop {
        termc = termc * r2 / Dd::from(-((2 * k - 1) as f64 * (2 * k) as f64));
        cos = cos + termc;
        k += 1;
        if termc.hi.abs() < 1e-35 || k > 20 {
            break;
        }
    }
    (sin, cos)
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, rhs: Dd) -> Dd {
        let (sh, sl) = two_sum(self.hi, rhs.hi);
        let (th, tl) = two_sum(self.lo, rhs.lo);
        let (h1, l1) = quick_two_sum(sh, sl + th);
        Dd::renorm(h1, l1 + tl)
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, rhs: Dd) -> Dd {
        self + (-rhs)
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, rhs: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, rhs.hi);
        Dd::renorm(p, e + self.hi * rhs.lo + self.lo * rhs.hi)
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, rhs: f64) -> Dd {
        let (p, e) = two_prod(self.hi, rhs);
        Dd::renorm(p, e + self.lo * rhs)
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * q1;
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * q2;
        let q3 = r.hi / rhs.hi;
        let (h, l) = quick_two_sum(q1, q2);
        Dd::renorm(h, l + q3)
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` at double-double
/// accuracy: f64 seeds refined by Newton steps on the double-double
/// Legendre recurrence.
pub fn gauss_legendre_dd(n: usize) -> (Vec<Dd>, Vec<Dd>) {
    let (seeds, _) = crate::quad::gauss_legendre(n);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &seed in &seeds {
        let mut x = Dd::from(seed);
        let mut deriv = Dd::ONE;
        for _ in 0..4 {
            let (p, d) = legendre_dd(n, x);
            deriv = d;
            x = x - p / d;
        }
        let one_minus = Dd::ONE - x * x;
        let w = Dd::from(2.0) / (one_minus * deriv * deriv);
        nodes.push(x);
        weights.push(w);
    }
    (nodes, weights)
}

fn legendre_dd(n: usize, x: Dd) -> (Dd, Dd) {
    let mut p0 = Dd::ONE;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = (x * p1 * (2.0 * kf - 1.0) - p0 * (kf - 1.0)) / Dd::from(kf);
        p0 = p1;
        p1 = p2;
    }
    let d = (x * p1 - p0) * Dd::from(n as f64) / (x * x - Dd::ONE);
    (p1, d)
}
