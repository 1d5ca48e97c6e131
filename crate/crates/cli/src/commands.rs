use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use nvpoly::dispersion::{check_dispersion, conformal_coefficients};
use nvpoly::functionals::{virial_residual, Distribution, PhaseSpaceState};
use nvpoly::momentum_integrals::{mu_closed_k1, mu_scaled_with};
use nvpoly::radial_ode::integrate_scaled;
use nvpoly::steady_state::{
    greens_solve, mass_curve, multiplier_consistency, scale_to_physical, scaled_mass, PhysicalProfile,
};
use nvpoly::variational::minimize_energy;

use crate::config::RunConfig;
use crate::{CliError, Command};

struct Output {
    dir: PathBuf,
    hash: String,
}

impl Output {
    fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        std::fs::create_dir_all(&cfg.output_dir)?;
        Ok(Self { dir: cfg.output_dir.clone(), hash: cfg.hash() })
    }

    fn header(&self) -> String {
        format!("config-sha256 {}", self.hash)
    }

    fn csv<F>(&self, name: &str, write: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut BufWriter<File>, Option<&str>) -> std::io::Result<()>,
    {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        write(&mut w, Some(&self.header()))?;
        w.flush()?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    fn stamp<T: Serialize>(&self, value: &T) -> Result<Value, CliError> {
        let v = serde_json::to_value(value).map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(match v {
            Value::Object(mut m) => {
                m.insert("config_hash".into(), Value::String(self.hash.clone()));
                Value::Object(m)
            }
            other => json!({ "config_hash": self.hash, "result": other }),
        })
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let doc = self.stamp(value)?;
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, &doc).map_err(std::io::Error::from)?;
        writeln!(w)?;
        w.flush()?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    fn summary<T: Serialize>(&self, value: &T) -> Result<(), CliError> {
        println!("{}", self.stamp(value)?);
        Ok(())
    }
}

pub(crate) fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<(), CliError> {
    let out = Output::new(cfg)?;
    match cmd {
        Command::Solve { .. } => solve(cfg, &out),
        Command::Sweep { .. } => sweep(cfg, &out),
        Command::Physical { .. } => physical(cfg, &out),
        Command::Minimize { .. } => minimize(cfg, &out),
        Command::Verify { .. } => verify(cfg, &out),
        Command::Dispersion { input, .. } => dispersion(cfg, input.as_deref(), &out),
    }
}

fn steady(cfg: &RunConfig) -> Result<PhysicalProfile, CliError> {
    let profile = integrate_scaled(cfg.a, cfg.k, &cfg.solver())?;
    Ok(scale_to_physical(&profile, cfg.c)?)
}

fn solve(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let p = integrate_scaled(cfg.a, cfg.k, &cfg.solver())?;
    let path = out.csv("profile.csv", |w, h| p.write_csv(w, h))?;
    out.summary(&json!({
        "k": p.k,
        "a": p.a,
        "r0": p.r0,
        "dpsi_r0": p.dpsi_at_r0,
        "crossing_reached": p.crossing_reached,
        "steps": p.steps,
        "profile": path,
    }))
}

fn sweep(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let s = &cfg.sweep;
    let n = s.points;
    let a_list: Vec<f64> = (0..n).map(|i| s.a_min + (s.a_max - s.a_min) * i as f64 / (n - 1) as f64).collect();
    let res = mass_curve(cfg.k, &a_list, cfg.c, &cfg.solver())?;
    let path = out.csv("sweep.csv", |w, h| res.write_csv(w, h))?;
    out.summary(&json!({
        "k": res.k,
        "c": res.c,
        "rows": res.rows.len(),
        "admissible": res.rows.iter().filter(|r| r.admissible).count(),
        "threshold": res.threshold,
        "monotone": res.is_monotone(),
        "violations": res.violations,
        "sweep": path,
    }))
}

fn physical(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let ph = steady(cfg)?;
    let path = out.csv("physical.csv", |w, h| ph.write_csv(w, h))?;
    let rep = multiplier_consistency(&ph, cfg.verify.multiplier_tol);
    let rep_path = out.json("multipliers.json", &rep)?;
    out.summary(&json!({
        "k": cfg.k,
        "a": cfg.a,
        "c": cfg.c,
        "e0": ph.e0(),
        "mass": ph.mass,
        "lq_norm": ph.lq_norm,
        "energy": ph.i_estimate,
        "support_radius": ph.support_radius,
        "multipliers_passed": rep.passed(),
        "profile": path,
        "multipliers": rep_path,
    }))
}

fn minimize(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let (m, j, reference) = match (cfg.mass, cfg.norm) {
        (Some(m), Some(j)) => (m, j, None),
        _ => {
            let ph = steady(cfg)?;
            (ph.mass, ph.lq_norm, Some(ph.i_estimate))
        }
    };
    let res = minimize_energy(m, j, cfg.k, &cfg.variational)?;
    let state_path = out.json("minimizer.json", &res)?;
    let trace_path = out.csv("trace.csv", |w, h| res.write_trace_csv(w, h))?;
    out.summary(&json!({
        "k": cfg.k,
        "mass": res.mass,
        "lq_norm": res.lq_norm,
        "energy": res.energy,
        "reference_energy": reference,
        "relative_gap": reference.map(|r| (res.energy - r) / r),
        "status": res.status,
        "iterations": res.iterations,
        "kkt": res.kkt,
        "minimizer": state_path,
        "trace": trace_path,
    }))
}

#[derive(Serialize)]
struct Check {
    name: String,
    value: f64,
    threshold: f64,
    passed: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value <= threshold }
    }
}

fn verify(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let v = &cfg.verify;
    let profile = integrate_scaled(cfg.a, cfg.k, &cfg.solver())?;
    let ph = scale_to_physical(&profile, cfg.c)?;
    let mut checks = Vec::new();

    let ext = profile.exterior_law_error().unwrap_or(f64::INFINITY);
    checks.push(Check::at_most("exterior_law", ext, v.exterior_tol));

    let sm = scaled_mass(&profile)?;
    checks.push(Check::at_most("scaled_mass_agreement", sm.relative_gap(), 1e-8));

    let state = ph.phase_space_state(cfg.grid.nr, cfg.grid.np)?;
    checks.push(Check::at_most("virial", virial_residual(&state)?, v.virial_tol));

    let rep = multiplier_consistency(&ph, v.multiplier_tol);
    for c in &rep.checks {
        checks.push(Check {
            name: format!("multiplier_{}", c.name),
            value: c.rel_error,
            threshold: v.multiplier_tol,
            passed: c.passed,
        });
    }

    let n = v.greens_nodes;
    let dist = ph.distribution(n, n)?;
    let g = greens_solve(&dist, &cfg.greens)?;
    let sup = g.r.iter().zip(&g.psi).map(|(r, x)| (x - ph.phi_at(*r).0).abs()).fold(0.0, f64::max);
    checks.push(Check::at_most("greens_agreement", sup, v.greens_tol));

    if cfg.k == 1.0 {
        let mut worst: f64 = 0.0;
        for i in 0..=400 {
            let psi = -20.0 * i as f64 / 400.0;
            let q = mu_scaled_with(psi, 1.0, &cfg.quadrature)?;
            let c = mu_closed_k1(psi);
            if q != 0.0 {
                worst = worst.max((c - q).abs() / q.abs());
            }
        }
        checks.push(Check::at_most("closed_form_k1", worst, v.closed_form_tol));
    }

    let passed = checks.iter().all(|c| c.passed);
    let report = json!({ "k": cfg.k, "a": cfg.a, "c": cfg.c, "passed": passed, "checks": checks });
    let path = out.json("verify.json", &report)?;
    out.summary(&json!({ "passed": passed, "checks": checks.len(), "report": path }))?;
    if passed {
        Ok(())
    } else {
        let failures =
            checks.iter().filter(|c| !c.passed).map(|c| serde_json::to_value(c).expect("check serializes")).collect();
        Err(CliError::Identity(failures))
    }
}

fn read_distribution(path: &Path) -> Result<Distribution, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if let Ok(s) = serde_json::from_str::<PhaseSpaceState>(&text) {
        return Ok(s.dist);
    }
    serde_json::from_str::<Distribution>(&text)
        .map_err(|e| CliError::Validation(format!("{}: not a distribution or state: {e}", path.display())))
}

fn dispersion(cfg: &RunConfig, input: Option<&Path>, out: &Output) -> Result<(), CliError> {
    let dist = match input {
        Some(p) => read_distribution(p)?,
        None => steady(cfg)?.distribution(cfg.grid.nr, cfg.grid.np)?,
    };
    let d = &cfg.dispersion;
    let coeffs = conformal_coefficients(&dist, d.xp_moment)?;
    let n = d.t_points;
    let t: Vec<f64> = (0..n).map(|i| d.t_max * i as f64 / (n - 1) as f64).collect();
    let rep = check_dispersion(&coeffs, &t);
    let path = out.csv("dispersion.csv", |w, h| rep.write_csv(w, h))?;
    out.summary(&json!({
        "coefficients": rep.coefficients,
        "slack": coeffs.slack(),
        "t0_analytic": rep.t0_analytic,
        "t0_empirical": rep.t0_empirical,
        "passed": rep.passed(),
        "report": path,
    }))?;
    if rep.passed() {
        Ok(())
    } else {
        let mut failures: Vec<Value> =
            rep.violations.iter().map(|t| json!({ "name": "dispersion_bound", "t": t })).collect();
        if !rep.slack_ok {
            failures.push(json!({ "name": "dispersion_slack", "value": coeffs.slack() }));
        }
        Err(CliError::Identity(failures))
    }
}
