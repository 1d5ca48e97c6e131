//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nvpoly::dispersion::{check_dispersion, conformal_coefficients, PhaseCloud};
use nvpoly::functionals::{compute_functionals, virial_residual, Distribution, PhaseSpaceState};
use nvpoly::momentum_integrals::{mu_closed_k1, mu_scaled};
use nvpoly::radial_ode::{find_threshold, integrate_scaled, SolverConfig};
use nvpoly::steady_state::{greens_solve, mass_curve, multiplier_consistency, steady_state, GreensConfig};
use nvpoly::variational::{
    family_energy, family_mass_threshold, minimize_energy, optimized_family, scaling_transport, VariationalConfig,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn threshold() -> Outcome {
    let t = Instant::now();
    let th = find_threshold(1.0, (-3.0, -0.05), &SolverConfig::default()).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    ensure(
        (th.depth() - 0.723).abs() <= 0.05 && secs < 120.0,
        format!("|a*| = {:.6}, bracket {:.0e}", th.depth(), th.width),
    )
}

const CASES: [(f64, f64); 4] = [(0.5, -0.3), (1.0, -0.5), (1.0, -1.0), (1.5, -0.5)];

fn virial() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut ratio = f64::INFINITY;
    for (k, a) in CASES {
        let ph = steady_state(k, a, 1.0, &SolverConfig::default()).map_err(|e| e.to_string())?;
        let v = |n| virial_residual(&ph.phase_space_state(n, n)?);
        let coarse = v(64).map_err(|e| e.to_string())?;
        let fine = v(256).map_err(|e| e.to_string())?;
        worst = worst.max(fine);
        ratio = ratio.min(coarse / fine);
    }
    ensure(worst <= 1e-2 && ratio >= 4.0, format!("max residual {worst:.2e}, min 64->256 ratio {ratio:.1}"))
}

fn exterior() -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, a) in CASES.iter().copied().chain([(1.0, -0.1), (1.0, -2.0)]) {
        let p = integrate_scaled(a, k, &SolverConfig::default()).map_err(|e| e.to_string())?;
        worst = worst.max(p.exterior_law_error().ok_or("no exterior samples")?);
    }
    ensure(worst <= 1e-8, format!("max deviation {worst:.2e}"))
}

fn multipliers() -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, a) in CASES {
        let ph = steady_state(k, a, 1.0, &SolverConfig::default()).map_err(|e| e.to_string())?;
        let rep = multiplier_consistency(&ph, 1e-4);
        if !rep.passed() {
            return Err(format!("k = {k}, a = {a}: {:?}", rep.failures()));
        }
        let (lo, hi) = rep.e0_interval;
        if !(lo < rep.e0 && rep.e0 < hi) {
            return Err(format!("k = {k}, a = {a}: E0 {} outside ({lo}, {hi})", rep.e0));
        }
        worst = rep.checks.iter().map(|c| c.rel_error).fold(worst, f64::max);
    }
    Ok(format!("{} cases, max relative error {worst:.2e}", CASES.len()))
}

fn monotone_mass() -> Outcome {
    let a: Vec<f64> = (0..50).map(|i| -0.68 + 0.63 * i as f64 / 49.0).collect();
    let s = mass_curve(1.0, &a, 1.0, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let admissible = s.rows.iter().filter(|r| r.admissible).count();
    let mut rows: Vec<_> = s.rows.iter().collect();
    rows.sort_by(|x, y| x.e0.total_cmp(&y.e0));
    let strict = rows.windows(2).all(|w| w[1].physical_mass < w[0].physical_mass);
    ensure(
        admissible == 50 && s.is_monotone() && strict,
        format!("{admissible}/50 admissible, {} violations", s.violations.len()),
    )
}

fn cross_validation() -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, a) in CASES {
        let ph = steady_state(k, a, 1.0, &SolverConfig::default()).map_err(|e| e.to_string())?;
        let d = ph.distribution(1024, 1024).map_err(|e| e.to_string())?;
        let g = greens_solve(&d, &GreensConfig::default()).map_err(|e| e.to_string())?;
        let sup = g.r.iter().zip(&g.psi).map(|(r, x)| (x - ph.phi_at(*r).0).abs()).fold(0.0, f64::max);
        worst = worst.max(sup);
    }
    let mut closed: f64 = 0.0;
    for i in 0..=400 {
        let psi = -20.0 * i as f64 / 400.0;
        let q = mu_scaled(psi, 1.0).map_err(|e| e.to_string())?;
        if q != 0.0 {
            closed = closed.max((mu_closed_k1(psi) - q).abs() / q);
        }
    }
    ensure(
        worst <= 1e-6 && closed <= 1e-10,
        format!("Green's vs ODE {worst:.2e}, closed form vs quadrature {closed:.2e}"),
    )
}

fn random_state(rng: &mut ChaCha8Rng, nr: usize, np: usize) -> (Distribution, Vec<f64>) {
    let rmax = rng.gen_range(2.0..10.0);
    let pmax = rng.gen_range(0.5..4.0);
    let r: Vec<f64> = (1..=nr).map(|i| i as f64 * rmax / nr as f64).collect();
    let p: Vec<f64> = (0..np).map(|i| i as f64 * pmax / (np - 1) as f64).collect();
    let (sr, sp) = (rng.gen_range(0.1..0.4) * rmax, rng.gen_range(0.1..0.4) * pmax);
    let amp = rng.gen_range(0.1..5.0);
    let mut f = Vec::with_capacity(nr * np);
    for ri in &r {
        for pj in &p {
            let base = amp * (-(ri / sr).powi(2) - (pj / sp).powi(2)).exp();
            f.push(base * rng.gen_range(0.5..1.5));
        }
    }
    let depth = rng.gen_range(0.05..1.0);
    let phi = r.iter().map(|x| -depth / (1.0 + (x / sr).powi(2)).sqrt()).collect();
    (Distribution::new(r, p, f).expect("valid grid"), phi)
}

fn scaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (d, phi) = random_state(&mut rng, 48, 32);
        let st = PhaseSpaceState::static_state(d, phi).map_err(|e| e.to_string())?;
        let before = compute_functionals(&st, 2.0).map_err(|e| e.to_string())?;
        let m2 = before.mass * rng.gen_range(0.1..10.0);
        let moved = scaling_transport(&st, m2).map_err(|e| e.to_string())?;
        let after = compute_functionals(&moved, 2.0).map_err(|e| e.to_string())?;
        let expect = before.hamiltonian * m2 / before.mass;
        worst = worst.max((after.hamiltonian - expect).abs() / expect.abs());
    }
    ensure(worst <= 1e-10, format!("50 states, max relative error {worst:.2e}"))
}

fn family() -> Outcome {
    let mut worst: f64 = f64::NEG_INFINITY;
    for k in [0.5, 1.0, 1.5] {
        for (m, j) in [(1.0, 1.0), (50.0, 2.0), (1e4, 0.5)] {
            for gamma in [0.01, 0.1, 0.5, 1.0, 3.0] {
                for alpha in [0.0, 0.3, 1.0, 3.0] {
                    let fe = family_energy(gamma, alpha, m, j, k).map_err(|e| e.to_string())?;
                    worst = worst.max((fe.energy - fe.bound) / fe.bound);
                }
            }
        }
    }
    if worst > 1e-12 {
        return Err(format!("energy exceeds bound by {worst:.2e} relative"));
    }
    let mut below = Vec::new();
    for k in [0.5, 1.0, 1.5] {
        let m = 2.0 * family_mass_threshold(1.0, k).map_err(|e| e.to_string())?;
        let fe = optimized_family(m, 1.0, k).map_err(|e| e.to_string())?;
        if fe.energy >= m {
            return Err(format!("k = {k}: optimized energy {} >= M = {m}", fe.energy));
        }
        below.push(format!("{:.4}", fe.energy / m));
    }
    Ok(format!("max (E - bound)/bound {worst:.1e}; optimized E/M = [{}]", below.join(", ")))
}

fn variational() -> Outcome {
    let ph = steady_state(1.0, -0.5, 1.0, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let res = minimize_energy(ph.mass, ph.lq_norm, 1.0, &VariationalConfig::default()).map_err(|e| e.to_string())?;
    let rel = (res.energy - ph.i_estimate).abs() / ph.i_estimate;
    ensure(
        rel <= 1e-2 && res.kkt.residual < 1e-2 && res.kkt.rank_correlation > 0.999,
        format!(
            "energy gap {rel:.2e}, KKT residual {:.2e}, rank correlation {:.6}",
            res.kkt.residual, res.kkt.rank_correlation
        ),
    )
}

fn dispersion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let t: Vec<f64> = (0..=200).map(|i| i as f64 * 0.25).collect();
    let mut min_slack = f64::INFINITY;
    for case in 0..100 {
        let (d, _) = random_state(&mut rng, 48, 32);
        let c0 = conformal_coefficients(&d, None).map_err(|e| e.to_string())?;
        let xp = rng.gen_range(-1.0..1.0) * (c0.c0 * c0.c2).sqrt();
        let c = conformal_coefficients(&d, Some(xp)).map_err(|e| e.to_string())?;
        let rep = check_dispersion(&c, &t);
        if !rep.passed() {
            return Err(format!("case {case}: {} violations, slack {:e}", rep.violations.len(), c.slack()));
        }
        min_slack = min_slack.min(c.slack() / c.h);
    }
    let cold = PhaseCloud::cold(&[[1.0, 0.0, 0.0], [0.0, -2.0, 0.5]], &[1.0, 3.0]).map_err(|e| e.to_string())?;
    let rep = check_dispersion(&cold.coefficients(), &t);
    let origin = PhaseCloud::cold(&[[0.0; 3]], &[1.0]).map_err(|e| e.to_string())?;
    let rep0 = check_dispersion(&origin.coefficients(), &t);
    ensure(rep.passed() && rep0.passed(), format!("100 random cases, min slack/h {min_slack:.2e}; cold data handled"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1 regime threshold", threshold),
        ("2 virial identity", virial),
        ("3 exterior field law", exterior),
        ("4 multiplier battery", multipliers),
        ("5 mass monotonicity", monotone_mass),
        ("6 solver cross-validation", cross_validation),
        ("7 scaling identity", scaling),
        ("8 test-family bound", family),
        ("9 variational agreement", variational),
        ("10 dispersion", dispersion),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        let out = check();
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(msg) => println!("PASS  {name}: {msg} [{secs:.2} s]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name}: {msg} [{secs:.2} s]");
            }
        }
    }
    println!("{}/10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
