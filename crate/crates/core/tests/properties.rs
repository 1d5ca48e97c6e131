use proptest::prelude::*;

use nvpoly::dispersion::{check_dispersion, conformal_coefficients};
use nvpoly::functionals::Distribution;
use nvpoly::momentum_integrals::{mu_closed_k1, mu_scaled};
use nvpoly::variational::{bump, renormalize};

fn blob(width: f64, spread: f64, tilt: f64) -> Distribution {
    let r: Vec<f64> = (1..=32).map(|i| i as f64 * 5.0 / 32.0).collect();
    let p: Vec<f64> = (0..24).map(|i| i as f64 * 3.0 / 23.0).collect();
    Distribution::from_fn(r, p, |r, p| (-(r / width).powi(2) - (p / spread).powi(2) + tilt * r * p).exp()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_matches_quadrature(psi in -15.0f64..-1e-3) {
        let q = mu_scaled(psi, 1.0).unwrap();
        prop_assert!((mu_closed_k1(psi) - q).abs() <= 1e-10 * q);
    }

    #[test]
    fn source_increases_with_depth(a in -10.0f64..-0.01, d in 0.01f64..1.0, k in 0.2f64..1.9) {
        prop_assert!(mu_scaled(a - d, k).unwrap() > mu_scaled(a, k).unwrap());
    }

    #[test]
    fn bump_stays_in_unit_interval(s in -1.0f64..4.0) {
        let b = bump(s);
        prop_assert!((0.0..=1.0).contains(&b));
    }

    #[test]
    fn renormalized_state_is_feasible(
        w in 0.5f64..2.0, sp in 0.3f64..1.5, m in 0.1f64..10.0, j in 0.1f64..10.0, k in 0.3f64..1.8,
    ) {
        let q = 1.0 + 1.0 / k;
        let out = renormalize(&blob(w, sp, 0.0), m, j, q).unwrap();
        prop_assert!((out.dist.mass().unwrap() - m).abs() <= 1e-12 * m);
        prop_assert!((out.dist.lq_norm(q).unwrap() - j).abs() <= 1e-12 * j);
    }

    #[test]
    fn dispersion_bound_holds(w in 0.5f64..2.0, sp in 0.2f64..2.0, tilt in -0.3f64..0.3, frac in -1.0f64..1.0) {
        let d = blob(w, sp, tilt);
        let c0 = conformal_coefficients(&d, None).unwrap();
        let c = conformal_coefficients(&d, Some(frac * (c0.c0 * c0.c2).sqrt())).unwrap();
        prop_assert!(c.slack() >= 0.0);
        let t: Vec<f64> = (0..=60).map(|i| i as f64 * 0.5).collect();
        prop_assert!(check_dispersion(&c, &t).passed());
    }
}
