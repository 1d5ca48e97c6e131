use approx::assert_relative_eq;
use nvpoly::functionals::{compute_functionals, virial_residual};
use nvpoly::radial_ode::{classify_regime, find_threshold, integrate_scaled, Regime, SolverConfig};
use nvpoly::steady_state::{
    e0_from_profile, greens_solve, mass_curve, multiplier_consistency, scale_to_physical, scaled_mass, steady_state,
    GreensConfig,
};
use nvpoly::Error;

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

#[test]
fn regimes_on_either_side_of_the_threshold() {
    assert_eq!(classify_regime(1.0, -0.3, -0.2, &cfg()).unwrap(), Regime::Crossing);
    assert_eq!(classify_regime(1.0, -1.5, -1.4, &cfg()).unwrap(), Regime::Ordered);
    assert!(matches!(classify_regime(1.0, -0.5, -0.5, &cfg()), Err(Error::DegeneratePair { .. })));
}

#[test]
fn threshold_needs_a_sign_change() {
    assert!(matches!(find_threshold(1.0, (-0.4, -0.1), &cfg()), Err(Error::SameRegime { .. })));
}

#[test]
fn mass_relation_between_scalings() {
    for (k, a, c) in [(0.5, -0.3, 1.0), (1.0, -1.0, 2.5)] {
        let ph = steady_state(k, a, c, &cfg()).unwrap();
        assert_relative_eq!(ph.mass, ph.mass_from_scaled.unwrap(), max_relative = 1e-9);
    }
}

#[test]
fn scaled_mass_two_ways() {
    let p = integrate_scaled(-0.8, 1.0, &cfg()).unwrap();
    assert!(scaled_mass(&p).unwrap().relative_gap() < 1e-9);
}

#[test]
fn e0_inside_unit_interval_and_increasing_toward_the_rim() {
    let e: Vec<f64> = [-2.0, -1.0, -0.5, -0.1]
        .iter()
        .map(|&a| e0_from_profile(&integrate_scaled(a, 1.0, &cfg()).unwrap()).unwrap())
        .collect();
    assert!(e.iter().all(|&v| v > 0.0 && v < 1.0));
    assert!(e.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn corrupted_profile_fails_the_identities() {
    let ph = steady_state(1.0, -0.5, 1.0, &cfg()).unwrap();
    assert!(multiplier_consistency(&ph, 1e-6).passed());
    let bad = multiplier_consistency(&ph.perturbed(1.01).unwrap(), 1e-4);
    for name in ["e0_virial", "c_formula", "support_radius", "slope_at_support"] {
        assert!(!bad.check(name).unwrap().passed, "{name} should fail");
    }
}

#[test]
fn virial_improves_with_refinement() {
    let ph = steady_state(1.0, -0.5, 1.0, &cfg()).unwrap();
    let coarse = virial_residual(&ph.phase_space_state(64, 64).unwrap()).unwrap();
    let fine = virial_residual(&ph.phase_space_state(256, 256).unwrap()).unwrap();
    assert!(fine < 1e-4 && coarse / fine > 4.0, "{coarse} -> {fine}");
}

#[test]
fn gridded_energy_matches_radial_quadrature() {
    let ph = steady_state(1.0, -0.5, 1.0, &cfg()).unwrap();
    let st = ph.phase_space_state(256, 256).unwrap();
    let rep = compute_functionals(&st, 2.0).unwrap();
    assert_relative_eq!(rep.mass, ph.mass, max_relative = 1e-3);
    assert_relative_eq!(rep.hamiltonian, ph.i_estimate, max_relative = 1e-3);
}

#[test]
fn greens_matches_shooting() {
    let ph = steady_state(0.5, -0.3, 1.0, &cfg()).unwrap();
    let d = ph.distribution(512, 512).unwrap();
    let g = greens_solve(&d, &GreensConfig::default()).unwrap();
    let err = g.r.iter().zip(&g.psi).map(|(r, x)| (x - ph.phi_at(*r).0).abs()).fold(0.0, f64::max);
    assert!(err < 5e-6, "{err}");
}

#[test]
fn sweep_is_deterministic_and_ordered() {
    let a: Vec<f64> = (0..12).map(|i| -0.6 + 0.05 * i as f64).collect();
    let s1 = mass_curve(1.0, &a, 1.0, &cfg()).unwrap();
    let s2 = mass_curve(1.0, &a, 1.0, &cfg()).unwrap();
    assert_eq!(s1, s2);
    assert!(s1.is_monotone());
    let mut buf = Vec::new();
    s1.write_csv(&mut buf, Some("run")).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("# run\na,r0,dpsi_r0,e0,scaled_mass,physical_mass\n"));
}

#[test]
fn physical_profile_round_trips_through_json() {
    let ph = scale_to_physical(&integrate_scaled(-0.7, 1.0, &cfg()).unwrap(), 1.0).unwrap();
    let json = serde_json::to_string(&ph).unwrap();
    let back: nvpoly::steady_state::PhysicalProfile = serde_json::from_str(&json).unwrap();
    assert_eq!(back.mass, ph.mass);
    assert_eq!(back.phi, ph.phi);
}
