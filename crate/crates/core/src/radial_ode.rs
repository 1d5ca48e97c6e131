//! Shooting for the scaled field equation `(r²ψ')' = r² e^{2ψ} μ̃(ψ)`.
//!
//! The equation is integrated as the first-order system
//! `u' = v/r²`, `v' = r² e^{2u} μ̃(u)` from `r = ε` with `(u, v) = (a, 0)`,
//! together with a mass accumulator `m' = 4πr² ρ̃(u)`. Integration stops where
//! `u` first reaches zero; beyond that radius the source vanishes and the
//! exact vacuum solution `v₀(1/r₀ − 1/r)` is attached.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_csv_header};
use crate::momentum_integrals::{check_k, mu_reduced, mu_scaled_with, rho_reduced, rho_scaled_with, well_factor};
use crate::ode::{integrate, single_step, DenseStep, StepControl};
use crate::quadrature::QuadratureConfig;

/// How `μ̃` is evaluated inside the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMode {
    /// Piecewise cubic table of the smooth reduced source.
    Table,
    /// Adaptive quadrature at every evaluation.
    Direct,
}

/// Initial data at `r = ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartMode {
    /// `(ψ, r²ψ') = (a, 0)`.
    Flat,
    /// Second-order Taylor expansion about the center.
    Taylor,
}

/// Settings of the shooting integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub r_max: f64,
    pub max_steps: usize,
    pub source: SourceMode,
    pub start: StartMode,
    pub table_nodes: usize,
    /// Vacuum nodes are stored out to this multiple of `r₀`.
    pub exterior_factor: f64,
    pub exterior_nodes: usize,
    #[serde(skip)]
    pub quadrature: QuadratureConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            r_max: 1e12,
            max_steps: 200_000,
            source: SourceMode::Table,
            start: StartMode::Flat,
            table_nodes: 2000,
            exterior_factor: 4.0,
            exterior_nodes: 64,
            quadrature: QuadratureConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("ode.{name} must be positive, got {v}")))
            }
        };
        positive(self.epsilon, "epsilon")?;
        positive(self.rel_tol, "rel_tol")?;
        positive(self.abs_tol, "abs_tol")?;
        positive(self.r_max, "r_max")?;
        if self.r_max <= self.epsilon {
            return Err(Error::InvalidParameter("ode.r_max must exceed ode.epsilon".into()));
        }
        if self.table_nodes < 8 {
            return Err(Error::InvalidParameter("ode.table_nodes must be at least 8".into()));
        }
        if !(self.exterior_factor > 1.0) || self.exterior_nodes < 2 {
            return Err(Error::InvalidParameter(
                "exterior_factor must exceed 1 and exterior_nodes be at least 2".into(),
            ));
        }
        self.quadrature.validate()
    }
}

/// Cubic Hermite table of `μ̃/L^{2k+3}` and `ρ̃/L^{2k+3}` on `[psi_min, 0]`.
///
/// Both reduced functions are smooth up to `ψ = 0`, unlike `μ̃` itself which
/// behaves like `|ψ|^{k+3/2}`. Node derivatives come from fourth-order
/// finite differences, so the interpolation error is `O(h⁴)`.
#[derive(Debug, Clone)]
pub struct SourceTable {
    k: f64,
    psi_min: f64,
    h: f64,
    mu: Vec<f64>,
    dmu: Vec<f64>,
    rho: Vec<f64>,
    drho: Vec<f64>,
    quadrature: QuadratureConfig,
}

fn fd_derivatives(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut d = vec![0.0; n];
    for i in 0..n {
        d[i] = if i >= 2 && i + 2 < n {
            (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) / (12.0 * h)
        } else if i == 0 {
            (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) / (12.0 * h)
        } else if i == 1 {
            (-3.0 * y[0] - 10.0 * y[1] + 18.0 * y[2] - 6.0 * y[3] + y[4]) / (12.0 * h)
        } else if i == n - 1 {
            (25.0 * y[n - 1] - 48.0 * y[n - 2] + 36.0 * y[n - 3] - 16.0 * y[n - 4] + 3.0 * y[n - 5]) / (12.0 * h)
        } else {
            (3.0 * y[n - 1] + 10.0 * y[n - 2] - 18.0 * y[n - 3] + 6.0 * y[n - 4] - y[n - 5]) / (12.0 * h)
        };
    }
    d
}

impl SourceTable {
    pub fn new(k: f64, psi_min: f64, nodes: usize, cfg: &QuadratureConfig) -> Result<Self> {
        check_k(k)?;
        if !(psi_min < 0.0) || !psi_min.is_finite() {
            return Err(Error::InvalidParameter(format!("table range must be negative, got {psi_min}")));
        }
        let nodes = nodes.max(8);
        let h = -psi_min / (nodes - 1) as f64;
        let mut mu = Vec::with_capacity(nodes);
        let mut rho = Vec::with_capacity(nodes);
        for i in 0..nodes {
            let psi = psi_min + i as f64 * h;
            mu.push(mu_reduced(psi, k, cfg)?);
            rho.push(rho_reduced(psi, k, cfg)?);
        }
        let dmu = fd_derivatives(&mu, h);
        let drho = fd_derivatives(&rho, h);
        Ok(Self { k, psi_min, h, mu, dmu, rho, drho, quadrature: *cfg })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn psi_min(&self) -> f64 {
        self.psi_min
    }

    fn hermite(&self, y: &[f64], d: &[f64], psi: f64) -> f64 {
        let x = (psi - self.psi_min) / self.h;
        let i = (x.floor() as usize).min(y.len() - 2);
        let t = x - i as f64;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * y[i] + h10 * self.h * d[i] + h01 * y[i + 1] + h11 * self.h * d[i + 1]
    }

    /// `μ̃(ψ)`; values below the table range fall back to quadrature.
    pub fn mu(&self, psi: f64) -> f64 {
        if psi >= 0.0 {
            0.0
        } else if psi < self.psi_min {
            mu_scaled_with(psi, self.k, &self.quadrature).unwrap_or(f64::NAN)
        } else {
            well_factor(psi, self.k) * self.hermite(&self.mu, &self.dmu, psi)
        }
    }

    /// `ρ̃(ψ)`; values below the table range fall back to quadrature.
    pub fn rho(&self, psi: f64) -> f64 {
        if psi >= 0.0 {
            0.0
        } else if psi < self.psi_min {
            rho_scaled_with(psi, self.k, &self.quadrature).unwrap_or(f64::NAN)
        } else {
            well_factor(psi, self.k) * self.hermite(&self.rho, &self.drho, psi)
        }
    }

    /// Largest relative deviation of the tabulated `μ̃` from direct quadrature
    /// over `samples` points placed between the nodes.
    pub fn max_relative_error(&self, samples: usize) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..samples {
            let psi = self.psi_min * (1.0 - (i as f64 + 0.37) / samples as f64);
            let exact = mu_scaled_with(psi, self.k, &self.quadrature)?;
            if exact > 0.0 {
                worst = worst.max((self.mu(psi) - exact).abs() / exact);
            }
        }
        Ok(worst)
    }
}

enum Source<'a> {
    Table(&'a SourceTable),
    Direct(f64, QuadratureConfig),
}

impl Source<'_> {
    fn mu(&self, psi: f64) -> f64 {
        match self {
            Source::Table(t) => t.mu(psi),
            Source::Direct(k, cfg) => mu_scaled_with(psi, *k, cfg).unwrap_or(f64::NAN),
        }
    }
    fn rho(&self, psi: f64) -> f64 {
        match self {
            Source::Table(t) => t.rho(psi),
            Source::Direct(k, cfg) => rho_scaled_with(psi, *k, cfg).unwrap_or(f64::NAN),
        }
    }
}

/// Numerical solution of the scaled field equation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaledProfile {
    pub k: f64,
    pub a: f64,
    pub r_nodes: Vec<f64>,
    pub psi: Vec<f64>,
    pub dpsi: Vec<f64>,
    /// First radius where `ψ = 0`.
    pub r0: Option<f64>,
    pub dpsi_at_r0: Option<f64>,
    /// `r²ψ'` on the vacuum exterior.
    pub v_inf: Option<f64>,
    /// `∫₀^{r₀} 4πr² ρ̃(ψ) dr` carried along the integration.
    pub mass_accumulated: Option<f64>,
    pub crossing_reached: bool,
    pub steps: usize,
    #[serde(skip)]
    segments: Vec<DenseStep<3>>,
}

impl PartialEq for ScaledProfile {
    fn eq(&self, o: &Self) -> bool {
        self.k == o.k
            && self.a == o.a
            && self.r_nodes == o.r_nodes
            && self.psi == o.psi
            && self.dpsi == o.dpsi
            && self.r0 == o.r0
            && self.dpsi_at_r0 == o.dpsi_at_r0
    }
}

impl ScaledProfile {
    /// Profile from raw samples, without crossing metadata.
    pub fn from_samples(k: f64, a: f64, r: Vec<f64>, psi: Vec<f64>, dpsi: Vec<f64>) -> Result<Self> {
        crate::quadrature::check_increasing(&r, "r_nodes")?;
        if psi.len() != r.len() || dpsi.len() != r.len() || r.len() < 2 {
            return Err(Error::Shape("profile samples must have matching lengths >= 2".into()));
        }
        Ok(Self {
            k,
            a,
            r_nodes: r,
            psi,
            dpsi,
            r0: None,
            dpsi_at_r0: None,
            v_inf: None,
            mass_accumulated: None,
            crossing_reached: false,
            steps: 0,
            segments: Vec::new(),
        })
    }

    /// Largest relative deviation of `r²ψ'` from its value at `r₀` over the stored exterior nodes.
    pub fn exterior_law_error(&self) -> Option<f64> {
        let r0 = self.r0?;
        let v0 = r0 * r0 * self.dpsi_at_r0?;
        let worst = self
            .r_nodes
            .iter()
            .zip(&self.dpsi)
            .filter(|(r, _)| **r >= r0)
            .map(|(r, d)| (r * r * d - v0).abs() / v0.abs())
            .fold(0.0, f64::max);
        Some(worst)
    }

    /// True when continuous output from the integrator is available.
    pub fn has_dense_output(&self) -> bool {
        !self.segments.is_empty()
    }

    /// `(ψ, ψ')` at radius `r`, or `None` outside the stored range.
    pub fn eval(&self, r: f64) -> Option<(f64, f64)> {
        let first = *self.r_nodes.first()?;
        if let (Some(r0), Some(v0)) = (self.r0, self.v_inf) {
            if r >= r0 {
                return Some((v0 * (1.0 / r0 - 1.0 / r), v0 / (r * r)));
            }
        }
        if r <= first {
            return Some((self.psi[0], self.dpsi[0]));
        }
        if !self.segments.is_empty() {
            let last = self.segments.last()?;
            if r <= last.t1() {
                let idx = self.segments.partition_point(|s| s.t1() < r).min(self.segments.len() - 1);
                let y = self.segments[idx].eval(r);
                return Some((y[0], y[1] / (r * r)));
            }
        }
        let n = self.r_nodes.len();
        if r > self.r_nodes[n - 1] {
            return None;
        }
        let i = self.r_nodes.partition_point(|&x| x < r).clamp(1, n - 1) - 1;
        let (x0, x1) = (self.r_nodes[i], self.r_nodes[i + 1]);
        let h = x1 - x0;
        let t = (r - x0) / h;
        let (y0, y1, d0, d1) = (self.psi[i], self.psi[i + 1], self.dpsi[i], self.dpsi[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * d1;
        let dv = ((6.0 * t2 - 6.0 * t) * y0 + (-6.0 * t2 + 6.0 * t) * y1) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (3.0 * t2 - 2.0 * t) * d1;
        Some((v, dv))
    }

    /// `ψ(∞) = r₀ ψ'(r₀)` for a profile with a crossing.
    pub fn psi_infinity(&self) -> Option<f64> {
        Some(self.v_inf? / self.r0?)
    }

    pub fn write_csv<W: Write>(&self, mut w: W, header: Option<&str>) -> std::io::Result<()> {
        write_csv_header(&mut w, header, "r,psi,dpsi")?;
        for i in 0..self.r_nodes.len() {
            writeln!(w, "{},{},{}", fmt_f64(self.r_nodes[i]), fmt_f64(self.psi[i]), fmt_f64(self.dpsi[i]))?;
        }
        Ok(())
    }
}

fn check_shooting(a: f64, k: f64) -> Result<()> {
    check_k(k)?;
    if !a.is_finite() || a >= 0.0 {
        return Err(Error::InvalidParameter(format!("shooting parameter must be negative, got {a}")));
    }
    Ok(())
}

/// Table covering every depth reached from `a`.
pub fn table_for(a: f64, k: f64, config: &SolverConfig) -> Result<SourceTable> {
    SourceTable::new(k, a - 1.0, config.table_nodes, &config.quadrature)
}

/// Integrates the scaled equation from the center value `a < 0`.
///
/// ```
/// use nvpoly::radial_ode::{integrate_scaled, SolverConfig};
/// let p = integrate_scaled(-1.0, 1.0, &SolverConfig::default()).unwrap();
/// assert!((p.r0.unwrap() - 6.633657).abs() < 1e-5);
/// ```
pub fn integrate_scaled(a: f64, k: f64, config: &SolverConfig) -> Result<ScaledProfile> {
    check_shooting(a, k)?;
    config.validate()?;
    match config.source {
        SourceMode::Table => {
            let table = table_for(a, k, config)?;
            run(a, k, config, Source::Table(&table))
        }
        SourceMode::Direct => run(a, k, config, Source::Direct(k, config.quadrature)),
    }
}

/// [`integrate_scaled`] reusing a prebuilt table (for sweeps).
pub fn integrate_scaled_with_table(a: f64, config: &SolverConfig, table: &SourceTable) -> Result<ScaledProfile> {
    check_shooting(a, table.k())?;
    config.validate()?;
    run(a, table.k(), config, Source::Table(table))
}

fn run(a: f64, k: f64, config: &SolverConfig, src: Source<'_>) -> Result<ScaledProfile> {
    let rhs = |r: f64, y: &[f64; 3]| {
        let u = y[0];
        let r2 = r * r;
        [y[1] / r2, r2 * (2.0 * u).exp() * src.mu(u), 4.0 * PI * r2 * src.rho(u)]
    };
    let eps = config.epsilon;
    let y0 = match config.start {
        StartMode::Flat => [a, 0.0, 0.0],
        StartMode::Taylor => {
            let s = (2.0 * a).exp() * src.mu(a);
            [a + s * eps * eps / 6.0, s * eps.powi(3) / 3.0, 4.0 * PI * src.rho(a) * eps.powi(3) / 3.0]
        }
    };
    let ctl = StepControl { rel_tol: config.rel_tol, abs_tol: config.abs_tol, max_steps: config.max_steps };
    let traj = integrate(rhs, eps, y0, config.r_max, &ctl, Some(|_: f64, y: &[f64; 3]| y[0]))?;
    let steps = traj.steps.len();

    let Some((te, _)) = traj.event else {
        log::warn!("no crossing before r_max = {:e} for a = {a}", config.r_max);
        let mut p = ScaledProfile::from_samples(
            k,
            a,
            traj.t.clone(),
            traj.y.iter().map(|y| y[0]).collect(),
            traj.y.iter().zip(&traj.t).map(|(y, r)| y[1] / (r * r)).collect(),
        )?;
        p.steps = steps;
        p.segments = traj.steps;
        return Ok(p);
    };

    // Re-step exactly to the crossing from the start of the last step, then
    // refine the crossing by Newton iterations on the stepped value.
    let last = traj.steps.len() - 1;
    let (ts, ys) = (traj.t[last], traj.y[last]);
    let mut r0 = te;
    let mut y = single_step(rhs, ts, &ys, r0 - ts);
    for _ in 0..4 {
        let slope = y[1] / (r0 * r0);
        if slope <= 0.0 {
            break;
        }
        let dr = -y[0] / slope;
        if dr.abs() <= 1e-15 * r0 {
            break;
        }
        r0 += dr;
        y = single_step(rhs, ts, &ys, r0 - ts);
    }
    let v0 = y[1];

    let mut r_nodes: Vec<f64> = traj.t[..=last].to_vec();
    let mut psi: Vec<f64> = traj.y[..=last].iter().map(|y| y[0]).collect();
    let mut dpsi: Vec<f64> = traj.y[..=last].iter().zip(&r_nodes).map(|(y, r)| y[1] / (r * r)).collect();
    if r0 > r_nodes[last] {
        r_nodes.push(r0);
        psi.push(0.0);
        dpsi.push(v0 / (r0 * r0));
    } else {
        *psi.last_mut().expect("nonempty") = 0.0;
    }
    let ratio = config.exterior_factor.powf(1.0 / config.exterior_nodes as f64);
    let mut r = r0;
    for _ in 0..config.exterior_nodes {
        r *= ratio;
        r_nodes.push(r);
        psi.push(v0 * (1.0 / r0 - 1.0 / r));
        dpsi.push(v0 / (r * r));
    }

    let mut segments = traj.steps;
    if let Some(s) = segments.last() {
        if s.t0 >= r0 {
            segments.pop();
        }
    }
    Ok(ScaledProfile {
        k,
        a,
        r_nodes,
        psi,
        dpsi,
        r0: Some(r0),
        dpsi_at_r0: Some(v0 / (r0 * r0)),
        v_inf: Some(v0),
        mass_accumulated: Some(y[2]),
        crossing_reached: true,
        steps,
        segments,
    })
}

/// Locates the first upward zero of `ψ` in a stored profile.
pub fn detect_crossing(profile: &ScaledProfile) -> Result<(f64, f64)> {
    let n = profile.r_nodes.len();
    let idx = (0..n.saturating_sub(1))
        .find(|&i| profile.psi[i] <= 0.0 && profile.psi[i + 1] > 0.0)
        .ok_or_else(|| Error::NoCrossing("psi has no upward sign change in the stored range".into()))?;
    let psi_at = |r: f64| profile.eval(r).map(|v| v.0).unwrap_or(f64::NAN);
    let (mut lo, mut hi) = (profile.r_nodes[idx], profile.r_nodes[idx + 1]);
    if profile.psi[idx] == 0.0 {
        let d = profile.eval(lo).map(|v| v.1).unwrap_or(profile.dpsi[idx]);
        return Ok((lo, d));
    }
    let (mut flo, mut fhi) = (psi_at(lo), psi_at(hi));
    while hi - lo > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = psi_at(mid);
        if fm <= 0.0 {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    let r0 = if flo.abs() <= fhi.abs() { lo } else { hi };
    let d = profile.eval(r0).map(|v| v.1).ok_or_else(|| Error::NoCrossing("slope unavailable".into()))?;
    Ok((r0, d))
}

/// Qualitative ordering of two shooting solutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Regime {
    /// `r₀¹ < r₀²` and `ψ'(r₀¹) > ψ'(r₀²)`: the graphs intersect.
    Crossing,
    /// `r₀² < r₀¹` and `ψ'(r₀²) < ψ'(r₀¹)`: the graphs stay ordered.
    Ordered,
    /// Neither pattern; both `(r₀, ψ'(r₀))` pairs are reported.
    Indeterminate { first: (f64, f64), second: (f64, f64) },
}

fn crossing_data(p: &ScaledProfile) -> Result<(f64, f64)> {
    match (p.r0, p.dpsi_at_r0) {
        (Some(r), Some(d)) => Ok((r, d)),
        _ => Err(Error::NoCrossing(format!("a = {} did not cross before r_max", p.a))),
    }
}

fn regime_of(first: (f64, f64), second: (f64, f64)) -> Regime {
    let ((r1, d1), (r2, d2)) = (first, second);
    if r1 < r2 && d1 > d2 {
        Regime::Crossing
    } else if r2 < r1 && d2 < d1 {
        Regime::Ordered
    } else {
        Regime::Indeterminate { first, second }
    }
}

fn check_pair(a1: f64, a2: f64) -> Result<()> {
    if a1 == a2 {
        return Err(Error::DegeneratePair { a1, a2 });
    }
    if !(a1 < a2 && a2 < 0.0) {
        return Err(Error::InvalidParameter(format!("need a1 < a2 < 0, got a1 = {a1}, a2 = {a2}")));
    }
    Ok(())
}

/// Classifies the pair `a1 < a2 < 0` by comparing their crossing data.
pub fn classify_regime(k: f64, a1: f64, a2: f64, config: &SolverConfig) -> Result<Regime> {
    check_pair(a1, a2)?;
    let table = table_for(a1, k, config)?;
    classify_with_table(a1, a2, config, &table)
}

fn classify_with_table(a1: f64, a2: f64, config: &SolverConfig, table: &SourceTable) -> Result<Regime> {
    check_pair(a1, a2)?;
    let (p1, p2) = rayon::join(
        || integrate_scaled_with_table(a1, config, table),
        || integrate_scaled_with_table(a2, config, table),
    );
    Ok(regime_of(crossing_data(&p1?)?, crossing_data(&p2?)?))
}

/// Output of [`find_threshold`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub k: f64,
    /// Boundary shooting parameter (negative).
    pub a_star: f64,
    /// Width of the final bracket.
    pub width: f64,
    /// Regime of pairs on the deep side `a < a*`.
    pub deep: Regime,
    /// Regime of pairs on the shallow side `a > a*`.
    pub shallow: Regime,
    pub iterations: usize,
}

impl Threshold {
    /// Threshold on the well-depth axis, `|a*|`.
    pub fn depth(&self) -> f64 {
        self.a_star.abs()
    }
}

const PAIR_HALF_WIDTH: f64 = 5e-5;

/// Bisects on the local regime of nearby pairs until the bracket is `10⁻⁴` wide.
pub fn find_threshold(k: f64, a_range: (f64, f64), config: &SolverConfig) -> Result<Threshold> {
    find_threshold_to(k, a_range, 1e-4, config)
}

/// [`find_threshold`] with an explicit bracket width.
pub fn find_threshold_to(k: f64, a_range: (f64, f64), width: f64, config: &SolverConfig) -> Result<Threshold> {
    check_k(k)?;
    let (mut lo, mut hi) = a_range;
    if !(lo < hi && hi + PAIR_HALF_WIDTH < 0.0) || !lo.is_finite() {
        return Err(Error::InvalidParameter(format!("invalid shooting range [{lo}, {hi}]")));
    }
    if !(width > 0.0) {
        return Err(Error::InvalidParameter("bracket width must be positive".into()));
    }
    let table = table_for(lo - PAIR_HALF_WIDTH, k, config)?;
    let local = |a: f64| classify_with_table(a - PAIR_HALF_WIDTH, a + PAIR_HALF_WIDTH, config, &table);
    let deep = local(lo)?;
    let shallow = local(hi)?;
    let is_crossing = |r: &Regime| matches!(r, Regime::Crossing);
    if is_crossing(&deep) == is_crossing(&shallow) {
        return Err(Error::SameRegime { lo, hi });
    }
    let deep_crossing = is_crossing(&deep);
    let mut iterations = 0;
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if is_crossing(&local(mid)?) == deep_crossing {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok(Threshold { k, a_star: 0.5 * (lo + hi), width: hi - lo, deep, shallow, iterations })
}
