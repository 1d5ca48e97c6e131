//! Values frozen from independent computations: arbitrary-precision quadrature
//! for the momentum integrals, a separate stiff-accurate integrator for the
//! Lane–Emden reference, and high-tolerance shooting runs.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use nvpoly::functionals::sobolev_constant;
use nvpoly::momentum_integrals::{
    momentum_average, mu_closed_k1, mu_closed_k1_variant, mu_scaled, ClosedForm, PolytropeParams,
};
use nvpoly::radial_ode::{integrate_scaled, SolverConfig, SourceMode};

// 50-digit quadrature of the k = 1 source at ψ = −1/2.
const MU_K1_HALF: f64 = 0.382_316_229_405_935_35;

// Lane–Emden index 5/2: first zero and slope there.
const XI1: f64 = 5.355_275_459_010_703;
const DTHETA1: f64 = -0.076_264_913_480_170_87;

#[test]
fn source_at_half_well() {
    assert_relative_eq!(mu_scaled(-0.5, 1.0).unwrap(), MU_K1_HALF, max_relative = 1e-12);
    assert_relative_eq!(mu_closed_k1(-0.5), MU_K1_HALF, max_relative = 1e-12);
}

#[test]
fn printed_variant_goes_negative() {
    assert!(mu_closed_k1_variant(-0.5, ClosedForm::AsPrinted) < 0.0);
    assert_eq!(mu_closed_k1_variant(-0.5, ClosedForm::Corrected), mu_closed_k1(-0.5));
}

#[test]
fn source_vanishes_at_the_rim() {
    assert_eq!(mu_scaled(0.0, 1.0).unwrap(), 0.0);
    assert_eq!(mu_closed_k1(0.0), 0.0);
}

#[test]
fn deep_well_momentum_average() {
    // E₀³·4π/6 is the k = 1, c = 1 limit of the momentum average at φ → −∞.
    let e0 = 0.6;
    let params = PolytropeParams::new(1.0, e0, 1.0).unwrap();
    let deep = momentum_average(-40.0, &params).unwrap();
    assert_relative_eq!(deep, 4.0 * PI * e0.powi(3) / 6.0, max_relative = 1e-12);
}

#[test]
fn lane_emden_limit() {
    // μ̃ ≈ C|ψ|^{5/2} near the rim, so shallow wells follow the n = 5/2 profile
    // with r̃₀ = ξ₁/s and ψ̃'(r̃₀) = |a|s|θ'(ξ₁)|, s² = C|a|^{3/2}.
    let c = 4.0 * PI * 2f64.powf(2.5) / 15.0;
    for a in [1e-6f64, 1e-8] {
        let s = (c * a.powf(1.5)).sqrt();
        let p = integrate_scaled(-a, 1.0, &SolverConfig::default()).unwrap();
        let r0 = p.r0.unwrap();
        let d = p.dpsi_at_r0.unwrap();
        assert!(((r0 - XI1 / s) / r0).abs() < 10.0 * a, "r0 {r0} vs {}", XI1 / s);
        assert!(((d - a * s * DTHETA1.abs()) / d).abs() < 10.0 * a);
    }
}

#[test]
fn shooting_goldens() {
    let cases = [
        (1.0, -1.0, 6.633_657_465_267, 0.177_033_371_221_8),
        (0.5, -1.0, 4.485_217_967_955, 0.316_590_798_479_3),
        (1.5, -1.0, 9.462_552_432_873, 0.103_443_959_227_6),
        (1.0, -3.0, 33.058_135_732, f64::NAN),
    ];
    for (k, a, r0, d) in cases {
        let p = integrate_scaled(a, k, &SolverConfig::default()).unwrap();
        assert_relative_eq!(p.r0.unwrap(), r0, max_relative = 1e-10);
        if d.is_finite() {
            assert_relative_eq!(p.dpsi_at_r0.unwrap(), d, max_relative = 1e-10);
        }
    }
}

#[test]
fn tabulated_and_direct_sources_agree() {
    let table = SolverConfig::default();
    let direct = SolverConfig { source: SourceMode::Direct, ..table };
    let a = integrate_scaled(-1.0, 1.0, &table).unwrap();
    let b = integrate_scaled(-1.0, 1.0, &direct).unwrap();
    assert_relative_eq!(a.r0.unwrap(), b.r0.unwrap(), max_relative = 1e-9);
    assert_relative_eq!(a.dpsi_at_r0.unwrap(), b.dpsi_at_r0.unwrap(), max_relative = 1e-9);
}

#[test]
fn sobolev_constant_value() {
    assert_relative_eq!(sobolev_constant(), 0.538_314_551_742_008_2, max_relative = 1e-15);
}
