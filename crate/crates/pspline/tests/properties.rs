//! Property tests for the structural invariants that should hold for
//! every admissible input, not just the worked examples.

use proptest::prelude::*;
use pspline::basis::{KnotGrid, SplineFunction};
use pspline::fit::{correction_gamma, fit, FitConfig};
use pspline::kernel::{eval_kernel, solve_kernel_coefficients};
use pspline::penalty::DifferenceMatrix;

proptest! {
    #[test]
    fn partition_of_unity(kn in 1usize..12, p in 0usize..=5, x in 0.0f64..=1.0) {
        let grid = KnotGrid::new(kn, p).unwrap();
        let values = grid.eval_basis(x).unwrap();
        let sum: f64 = values.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(values.iter().all(|v| *v >= 0.0));
        prop_assert!(values.iter().filter(|v| **v > 0.0).count() <= p + 1);
    }

    #[test]
    fn local_support(kn in 2usize..10, p in 0usize..=4, x in 0.0f64..=1.0) {
        let grid = KnotGrid::new(kn, p).unwrap();
        for (idx0, v) in grid.eval_basis(x).unwrap().iter().enumerate() {
            if *v != 0.0 {
                let k = idx0 as i64 + 1;
                prop_assert!(x >= grid.knot(k - p as i64 - 1) - 1e-12);
                prop_assert!(x <= grid.knot(k) + 1e-12);
            }
        }
    }

    #[test]
    fn constant_splines_reproduce_constants(kn in 1usize..10, p in 0usize..=5,
                                            c in -10.0f64..10.0, x in 0.0f64..=1.0) {
        let grid = KnotGrid::new(kn, p).unwrap();
        let f = SplineFunction::new(grid, vec![c; grid.dim()]).unwrap();
        prop_assert!((f.eval(x).unwrap() - c).abs() < 1e-12 * c.abs().max(1.0));
    }

    #[test]
    fn differences_annihilate_low_degree_polynomials(m in 1usize..=4, q in 0usize..4) {
        prop_assume!(q < m);
        let dim = 2 * m + 5;
        let d = DifferenceMatrix::new(m, dim).unwrap();
        let b: Vec<f64> = (1..=dim).map(|k| (k as f64).powi(q as i32)).collect();
        let out = d.apply(&b);
        let scale = b.last().copied().unwrap_or(1.0);
        prop_assert!(out.iter().all(|v| v.abs() <= 1e-12 * scale));
    }

    #[test]
    fn kernel_is_symmetric_and_beta_scales(m in 1usize..=6, beta in 0.5f64..40.0,
                                           t in 0.0f64..=1.0, s in 0.0f64..=1.0) {
        let spec = solve_kernel_coefficients(m).unwrap();
        let a = eval_kernel(&spec, beta, t, s);
        let b = eval_kernel(&spec, beta, s, t);
        prop_assert_eq!(a, b);
        // beta enters only through the profile: K_beta(t,s) = beta K_1(beta|t-s|)
        let profile = beta * spec.value(1.0, beta * (t - s).abs());
        prop_assert!((a - profile).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn fit_and_correction_telescope_agree(seed in 0u64..500, t in 0.011f64..0.93) {
        // p = 3, m = 1: correction must equal the two-evaluation difference
        let config = FitConfig::new(36, 12, 3, 1, 0.4).unwrap();
        let y: Vec<f64> = (0..36).map(|i| ((i as u64 * 2654435761 + seed) % 97) as f64 / 97.0).collect();
        let fitted = fit(&y, &config).unwrap();
        let gamma = correction_gamma(&fitted, t).unwrap();
        let direct = fitted.spline().eval(t).unwrap()
            - fitted.degree_m_companion().eval(t).unwrap();
        prop_assert!((gamma - direct).abs() < 1e-10);
    }
}
