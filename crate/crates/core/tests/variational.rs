use approx::assert_relative_eq;
use nvpoly::functionals::{compute_functionals, Distribution, PhaseSpaceState};
use nvpoly::radial_ode::SolverConfig;
use nvpoly::steady_state::{steady_state, GreensConfig};
use nvpoly::variational::{
    bump, family_energy, field_functional, minimize_energy, minimize_from, reduced_energy, reduced_field, renormalize,
    scaling_transport, MinimizerStatus, VariationalConfig,
};
use nvpoly::Error;

fn grid(nr: usize, r_max: f64, np: usize, p_max: f64) -> (Vec<f64>, Vec<f64>) {
    let r = (1..=nr).map(|i| i as f64 * r_max / nr as f64).collect();
    let p = (0..np).map(|i| i as f64 * p_max / (np - 1) as f64).collect();
    (r, p)
}

fn gaussian(nr: usize, np: usize) -> Distribution {
    let (r, p) = grid(nr, 6.0, np, 3.0);
    Distribution::from_fn(r, p, |r, p| (-r * r - 2.0 * p * p).exp()).unwrap()
}

#[test]
fn renormalize_leaves_feasible_input_alone() {
    let d = gaussian(48, 32);
    let q = 2.0;
    let (m, j) = (d.mass().unwrap(), d.lq_norm(q).unwrap());
    let out = renormalize(&d, m, j, q).unwrap();
    assert_relative_eq!(out.lambda, 1.0, epsilon = 1e-14);
    assert_relative_eq!(out.alpha, 1.0, epsilon = 1e-14);
}

#[test]
fn renormalize_hits_both_targets() {
    let d = gaussian(48, 32);
    for q in [1.5, 2.0, 3.0] {
        let m = 2.0 * d.mass().unwrap();
        let j = 0.7 * d.lq_norm(q).unwrap();
        let out = renormalize(&d, m, j, q).unwrap();
        assert_relative_eq!(out.dist.mass().unwrap(), m, max_relative = 1e-12);
        assert_relative_eq!(out.dist.lq_norm(q).unwrap(), j, max_relative = 1e-12);
    }
}

#[test]
fn renormalize_rejects_empty_data() {
    let (r, p) = grid(8, 1.0, 4, 1.0);
    let z = Distribution::zeros(r, p).unwrap();
    assert!(matches!(renormalize(&z, 1.0, 1.0, 2.0), Err(Error::ZeroDistribution)));
    assert!(renormalize(&gaussian(8, 4), 1.0, 1.0, 1.0).is_err());
}

#[test]
fn reduced_field_is_a_minimizer_in_phi() {
    let d = gaussian(96, 48);
    let psi = reduced_field(&d, &GreensConfig::default()).unwrap().psi;
    let base = field_functional(&d, &psi).unwrap();
    let mut gaps = Vec::new();
    for eps in [1e-2, 5e-3] {
        let probe: Vec<f64> = d.r_grid.iter().zip(&psi).map(|(r, x)| x + eps * bump(*r / 2.0)).collect();
        let e = field_functional(&d, &probe).unwrap();
        assert!(e >= base - 1e-10, "eps {eps}: {e} < {base}");
        gaps.push(e - base);
    }
    // second-order gap
    assert_relative_eq!(gaps[0] / gaps[1], 4.0, max_relative = 0.1);
}

#[test]
fn reduced_energy_of_a_thin_state_is_near_its_kinetic_part() {
    let d = gaussian(64, 32).scaled(1e-6);
    let e = reduced_energy(&d, &GreensConfig::default()).unwrap();
    let free = d.integrate_with(|_, j| (1.0 + d.p_grid[j] * d.p_grid[j]).sqrt()).unwrap();
    assert_relative_eq!(e.energy, free, max_relative = 1e-6);
    assert!(e.field.psi.iter().all(|v| *v <= 0.0));
}

#[test]
fn minimizer_matches_the_steady_state() {
    let ph = steady_state(1.0, -0.5, 1.0, &SolverConfig::default()).unwrap();
    let cfg = VariationalConfig::default();
    let res = minimize_energy(ph.mass, ph.lq_norm, 1.0, &cfg).unwrap();
    assert!((res.energy - ph.i_estimate).abs() / ph.i_estimate < 1e-2);
    assert!(res.kkt.residual < 1e-2);
    assert!(res.kkt.rank_correlation > 0.999);
    assert_relative_eq!(res.mass, ph.mass, max_relative = 1e-10);
    assert_eq!(res.status == MinimizerStatus::SubThreshold, res.energy >= res.mass);
    assert!(res.trace.windows(2).all(|w| w[1].energy <= w[0].energy));
}

#[test]
fn warm_start_from_the_polytrope_barely_moves() {
    let ph = steady_state(1.0, -0.5, 1.0, &SolverConfig::default()).unwrap();
    let cfg = VariationalConfig::default();
    let init = ph.distribution(64, 64).unwrap();
    let res = minimize_from(&init, ph.mass, ph.lq_norm, 1.0, &cfg).unwrap();
    let start = res.trace[0].energy;
    assert!(res.energy <= start);
    assert!((start - res.energy) / start < 1e-3);
    assert!((res.energy - ph.i_estimate).abs() / ph.i_estimate < 1e-3);
}

#[test]
fn minimizer_json_carries_grid_and_kkt() {
    let cfg = VariationalConfig { nr: 24, np: 24, ..Default::default() };
    let res = minimize_energy(1.0, 1.0, 1.0, &cfg).unwrap();
    let v = serde_json::to_value(&res).unwrap();
    for key in ["r_grid", "p_grid", "f", "phi", "kkt", "energy", "status"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let mut csv = Vec::new();
    res.write_trace_csv(&mut csv, None).unwrap();
    assert!(String::from_utf8(csv).unwrap().starts_with("iter,energy,kkt_residual\n"));
}

#[test]
fn scaling_transport_identities() {
    let ph = steady_state(1.0, -0.7, 1.0, &SolverConfig::default()).unwrap();
    let st = ph.phase_space_state(96, 96).unwrap();
    let q = 2.0;
    let before = compute_functionals(&st, q).unwrap();
    let same = scaling_transport(&st, before.mass).unwrap();
    assert_eq!(same, st);
    let m2 = 2.0 * before.mass;
    let after = compute_functionals(&scaling_transport(&st, m2).unwrap(), q).unwrap();
    assert_relative_eq!(after.mass, m2, max_relative = 1e-12);
    assert_relative_eq!(after.hamiltonian, 2.0 * before.hamiltonian, max_relative = 1e-10);
    let k: f64 = 1.0;
    let expect = before.lq_norm * 0.5f64.powf((2.0 - k) / (1.0 + k));
    assert_relative_eq!(after.lq_norm, expect, max_relative = 1e-10);
}

#[test]
fn scaling_transport_keeps_the_field_derivative() {
    let d = gaussian(16, 8);
    let phi = vec![-0.1; 16];
    let phi_t: Vec<f64> = (0..16).map(|i| i as f64 * 1e-3).collect();
    let st = PhaseSpaceState::new(d, phi, phi_t.clone()).unwrap();
    assert_eq!(scaling_transport(&st, 3.0).unwrap().phi_t, phi_t);
    assert!(scaling_transport(&st, -1.0).is_err());
}

#[test]
fn family_box_has_exact_mass_and_norm() {
    use std::f64::consts::PI;
    for (k, m, j) in [(0.5, 3.0, 1.5), (1.0, 1e5, 1.0), (1.5, 2.0, 4.0)] {
        let fe = family_energy(0.3, 0.2, m, j, k).unwrap();
        let q = 1.0 + 1.0 / k;
        let vol = (4.0 * PI / 3.0).powi(2) * fe.beta.powi(3) * fe.gamma.powi(3);
        assert_relative_eq!(fe.height * vol, m, max_relative = 1e-12);
        assert_relative_eq!(fe.height * vol.powf(1.0 / q), j, max_relative = 1e-12);
    }
}
