//! Test-function catalog for the simulation studies. Every entry has
//! closed-form derivatives of all orders, so the bias law can be
//! checked against the exact `f^(2m)`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TruthFn {
    /// `sum_k coeffs[k] x^k`
    Polynomial { coeffs: Vec<f64> },
    /// `amplitude * sin(2 pi x)`
    Sine { amplitude: f64 },
}

impl TruthFn {
    pub fn value(&self, x: f64) -> f64 {
        self.derivative(0, x)
    }

    pub fn derivative(&self, order: usize, x: f64) -> f64 {
        match self {
            TruthFn::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (power, c) in coeffs.iter().enumerate() {
                    if power >= order {
                        let mut factor = *c;
                        for q in 0..order {
                            factor *= (power - q) as f64;
                        }
                        acc += factor * x.powi((power - order) as i32);
                    }
                }
                acc
            }
            TruthFn::Sine { amplitude } => {
                let w = 2.0 * std::f64::consts::PI;
                // d^k sin(wx) = w^k sin(wx + k pi/2)
                amplitude
                    * w.powi(order as i32)
                    * (w * x + order as f64 * std::f64::consts::FRAC_PI_2).sin()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives() {
        let f = TruthFn::Polynomial { coeffs: vec![1.0, -2.0, 0.0, 4.0] };
        assert_eq!(f.value(0.5), 1.0 - 1.0 + 0.5);
        assert_eq!(f.derivative(1, 0.5), -2.0 + 12.0 * 0.25);
        assert_eq!(f.derivative(3, 0.9), 24.0);
        assert_eq!(f.derivative(4, 0.9), 0.0);
    }

    #[test]
    fn sine_derivatives() {
        let f = TruthFn::Sine { amplitude: 2.0 };
        let w = 2.0 * std::f64::consts::PI;
        let x = 0.3;
        assert!((f.value(x) - 2.0 * (w * x).sin()).abs() < 1e-15);
        assert!((f.derivative(1, x) - 2.0 * w * (w * x).cos()).abs() < 1e-12);
        assert!((f.derivative(4, x) - 2.0 * w.powi(4) * (w * x).sin()).abs() < 1e-9);
        // second derivative flips sign
        assert!((f.derivative(2, x) + 2.0 * w * w * (w * x).sin()).abs() < 1e-10);
    }
}
