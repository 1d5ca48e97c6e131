//! Constrained energy minimization on a phase-space grid.
//!
//! The reduced energy of a distribution is `𝓔(f, ψ_f)`, where `ψ_f` solves the
//! field equation for `f` (see [`greens_solve`]). [`minimize_energy`] descends
//! this functional over the set `{‖f‖₁ = M, ‖f‖_{L^q} = J}` with `q = 1 + 1/k`.
//! Each step mixes `f^{1/k}` with the best response `((μ − E)₊/c)`, where
//! `E = √(e^{2ψ_f} + p²)`, and projects back onto the constraints.
//!
//! The module also carries the explicit box-and-bump family whose energy
//! bounds the infimum from above, and the mass-changing scaling map.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{exterior_field_energy, radial_gradient, Distribution, PhaseSpaceState};
use crate::io::{fmt_f64, write_csv_header};
use crate::quadrature::{ball_weights, integrate, QuadratureConfig};
use crate::steady_state::{greens_solve, GreensConfig, GreensSolution};

/// Settings of the descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VariationalConfig {
    pub nr: usize,
    pub np: usize,
    /// Momentum cutoff of the grid.
    pub p_max: f64,
    /// Momentum radius of the initial box.
    pub box_momentum: f64,
    /// Grid radius as a multiple of the initial box radius.
    pub grid_factor: f64,
    pub max_iterations: usize,
    /// Stop once the energy drops by less than `stall_tol` (relative) over this many steps.
    pub stall_window: usize,
    pub stall_tol: f64,
    pub min_step: f64,
    pub greens: GreensConfig,
}

impl Default for VariationalConfig {
    fn default() -> Self {
        Self {
            nr: 64,
            np: 64,
            p_max: 1.0,
            box_momentum: 0.5,
            grid_factor: 3.5,
            max_iterations: 2000,
            stall_window: 50,
            stall_tol: 1e-9,
            min_step: 1e-4,
            greens: GreensConfig::default(),
        }
    }
}

impl VariationalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nr < 3 || self.np < 3 {
            return Err(Error::InvalidGrid("variational grid needs at least 3x3 nodes".into()));
        }
        if !(self.p_max > 0.0) || !(self.box_momentum > 0.0) || self.box_momentum > self.p_max {
            return Err(Error::InvalidParameter("need 0 < box_momentum <= p_max".into()));
        }
        if !(self.grid_factor > 1.0) || !self.grid_factor.is_finite() {
            return Err(Error::InvalidParameter("grid_factor must exceed 1".into()));
        }
        if self.stall_window == 0 || !(self.stall_tol >= 0.0) {
            return Err(Error::InvalidParameter("stall window must be positive".into()));
        }
        if !(self.min_step > 0.0 && self.min_step < 1.0) {
            return Err(Error::InvalidParameter("min_step must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

fn check_k(k: f64) -> Result<()> {
    if !(k > 0.0 && k < 2.0) {
        return Err(Error::InvalidParameter(format!("k must lie in (0, 2), got {k}")));
    }
    Ok(())
}

fn check_targets(m: f64, j: f64) -> Result<()> {
    if !(m > 0.0) || !m.is_finite() || !(j > 0.0) || !j.is_finite() {
        return Err(Error::InvalidParameter(format!("targets must be positive, got M = {m}, J = {j}")));
    }
    Ok(())
}

/// Field minimizer `ψ_f` of `φ ↦ 𝓔(f, φ)`.
pub fn reduced_field(dist: &Distribution, cfg: &GreensConfig) -> Result<GreensSolution> {
    greens_solve(dist, cfg)
}

fn energy_with(d: &Distribution, wr: &[f64], wp: &[f64], psi: &[f64], dpsi: &[f64]) -> f64 {
    let p2: Vec<f64> = d.p_grid.iter().map(|p| p * p).collect();
    let kin = d.integrate_weighted(wr, wp, |i, j| ((2.0 * psi[i]).exp() + p2[j]).sqrt());
    let n = d.nr();
    let grad: f64 = wr.iter().zip(dpsi).map(|(w, g)| w * g * g).sum();
    kin + 0.5 * grad + exterior_field_energy(d.r_grid[n - 1], dpsi[n - 1])
}

/// Reduced energy together with the field it was evaluated on.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedEnergy {
    pub energy: f64,
    pub field: GreensSolution,
}

/// `𝓔(f, ψ_f)`, with the field gradient taken from the Green's representation.
pub fn reduced_energy(dist: &Distribution, cfg: &GreensConfig) -> Result<ReducedEnergy> {
    let field = reduced_field(dist, cfg)?;
    let (wr, wp) = dist.weights()?;
    let energy = energy_with(dist, &wr, &wp, &field.psi, &field.dpsi);
    if !energy.is_finite() {
        return Err(Error::NonFinite("reduced energy".into()));
    }
    Ok(ReducedEnergy { energy, field })
}

/// `𝓔(f, φ)` for an arbitrary potential sampled on the radial grid.
pub fn field_functional(dist: &Distribution, phi: &[f64]) -> Result<f64> {
    if phi.len() != dist.nr() {
        return Err(Error::Shape("potential length differs from the radial grid".into()));
    }
    let dphi = radial_gradient(&dist.r_grid, phi)?;
    let (wr, wp) = dist.weights()?;
    let e = energy_with(dist, &wr, &wp, phi, &dphi);
    if !e.is_finite() {
        return Err(Error::NonFinite("field functional".into()));
    }
    Ok(e)
}

/// `½‖∇φ‖²` for a radial profile, with the Coulomb exterior.
pub fn dirichlet_energy(r: &[f64], phi: &[f64]) -> Result<f64> {
    let d = radial_gradient(r, phi)?;
    let w = ball_weights(r)?;
    let n = r.len();
    let s: f64 = w.iter().zip(&d).map(|(w, g)| w * g * g).sum();
    Ok(0.5 * s + exterior_field_energy(r[n - 1], d[n - 1]))
}

/// Outcome of [`renormalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Renormalized {
    pub dist: Distribution,
    /// Amplitude factor applied to fix the mass.
    pub lambda: f64,
    /// Dilation `f(x) ↦ α³ f(αx)` applied to fix the `L^q` norm.
    pub alpha: f64,
}

/// Projects `f` onto `{‖f‖₁ = M, ‖f‖_{L^q} = J}`.
///
/// First `f ↦ λf` sets the mass, then the dilation `f ↦ α³f(α·)` with
/// `α = (J/‖λf‖_q)^{q/(3q−3)}` sets the norm without changing the mass.
/// The dilation acts on the radial grid, so it is exact on the grid.
pub fn renormalize(dist: &Distribution, m: f64, j: f64, q: f64) -> Result<Renormalized> {
    check_targets(m, j)?;
    if !(q > 1.0) || !q.is_finite() {
        return Err(Error::InvalidParameter(format!("q must exceed 1, got {q}")));
    }
    dist.validate()?;
    let mut d = dist.clone();
    let mut lambda = 1.0;
    let mut alpha = 1.0;
    for _ in 0..3 {
        let mass = d.mass()?;
        if mass <= 0.0 {
            return Err(Error::ZeroDistribution);
        }
        let l = m / mass;
        let norm = d.lq_norm(q)? * l;
        let a = (j / norm).powf(q / (3.0 * q - 3.0));
        if l == 1.0 && a == 1.0 {
            break;
        }
        let a3 = a * a * a;
        for v in &mut d.f {
            *v *= l * a3;
        }
        for r in &mut d.r_grid {
            *r /= a;
        }
        lambda *= l;
        alpha *= a;
        let err_m = (d.mass()? - m).abs() / m;
        let err_j = (d.lq_norm(q)? - j).abs() / j;
        if err_m < 1e-13 && err_j < 1e-13 {
            break;
        }
    }
    if !lambda.is_finite() || !alpha.is_finite() {
        return Err(Error::NonFinite("renormalization factors".into()));
    }
    Ok(Renormalized { dist: d, lambda, alpha })
}

/// Uniform box of height `(J^q/M)^{1/(q−1)}` sampled on a fresh grid and renormalized.
pub fn box_state(m: f64, j: f64, k: f64, cfg: &VariationalConfig) -> Result<Distribution> {
    check_k(k)?;
    check_targets(m, j)?;
    cfg.validate()?;
    let q = 1.0 + 1.0 / k;
    let h = (j.powf(q) / m).powf(1.0 / (q - 1.0));
    let volume = m / h;
    let p0 = cfg.box_momentum;
    let r0 = (volume / ((4.0 * PI / 3.0).powi(2) * p0.powi(3))).cbrt();
    let rg = cfg.grid_factor * r0;
    let r: Vec<f64> = (1..=cfg.nr).map(|i| i as f64 * rg / cfg.nr as f64).collect();
    let p: Vec<f64> = (0..cfg.np).map(|i| i as f64 * cfg.p_max / (cfg.np - 1) as f64).collect();
    let d = Distribution::from_fn(r, p, |r, p| if r <= r0 && p <= p0 { h } else { 0.0 })?;
    Ok(renormalize(&d, m, j, q)?.dist)
}

/// Multipliers `(E₀, c)` of the best response `((E₀ − E)₊/c)^k` with mass `M`
/// and norm `J` for a fixed energy table `E`.
fn best_response(e: &[f64], w: &[f64], k: f64, m: f64, j: f64) -> Result<(f64, f64)> {
    let q = 1.0 + 1.0 / k;
    let moments = |mu: f64| {
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for (ei, wi) in e.iter().zip(w) {
            let t = mu - ei;
            if t > 0.0 && *wi > 0.0 {
                let tk = t.powf(k);
                s0 += wi * tk;
                s1 += wi * tk * t;
            }
        }
        (s0, s1.powf(1.0 / q))
    };
    let ratio = |mu: f64| {
        let (a, b) = moments(mu);
        if b > 0.0 {
            a / b
        } else {
            0.0
        }
    };
    let target = m / j;
    let emin = e.iter().cloned().fold(f64::INFINITY, f64::min);
    let emax = e.iter().cloned().fold(0.0f64, f64::max);
    let mut lo = emin;
    let mut hi = 4.0 * emax;
    if ratio(hi) < target {
        return Err(Error::InvalidGrid(format!(
            "grid cannot hold mass {m} at norm {j}; enlarge the momentum cutoff or grid"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let mu = hi;
    let (s0, _) = moments(mu);
    Ok((mu, (s0 / m).powf(1.0 / k)))
}

/// Weighted least-squares fit of `E = E₀ − c f^{1/k}` on the support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktFit {
    pub e0: f64,
    pub c: f64,
    /// `max |E + c f^{1/k} − E₀|` over the support.
    pub residual: f64,
    /// Spearman correlation of `f` and `−E` over the support.
    pub rank_correlation: f64,
    /// `min (E − E₀)` off the support; `+∞` when the support fills the grid.
    pub off_support_gap: f64,
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for &t in &idx[i..=j] {
            out[t] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return f64::NAN;
    }
    let ra = ranks(&a[..n]);
    let rb = ranks(&b[..n]);
    let ma = ra.iter().sum::<f64>() / n as f64;
    let mb = rb.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let x = ra[i] - ma;
        let y = rb[i] - mb;
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    sab / (saa * sbb).sqrt()
}

fn energy_table(d: &Distribution, psi: &[f64]) -> Vec<f64> {
    let mut e = Vec::with_capacity(d.f.len());
    for &ps in psi {
        let m2 = (2.0 * ps).exp();
        for &p in &d.p_grid {
            e.push((m2 + p * p).sqrt());
        }
    }
    e
}

fn cell_weights(wr: &[f64], wp: &[f64]) -> Vec<f64> {
    wr.iter().flat_map(|a| wp.iter().map(move |b| a * b)).collect()
}

/// KKT fit of a gridded state against its field.
pub fn kkt_fit(dist: &Distribution, psi: &[f64], k: f64) -> Result<KktFit> {
    check_k(k)?;
    if psi.len() != dist.nr() {
        return Err(Error::Shape("potential length differs from the radial grid".into()));
    }
    let (wr, wp) = dist.weights()?;
    let w = cell_weights(&wr, &wp);
    let e = energy_table(dist, psi);
    let (mut sw, mut sg, mut sgg, mut se, mut seg) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut fs = Vec::new();
    let mut es = Vec::new();
    for (idx, &fv) in dist.f.iter().enumerate() {
        if fv > 0.0 {
            let g = fv.powf(1.0 / k);
            let wi = w[idx];
            sw += wi;
            sg += wi * g;
            sgg += wi * g * g;
            se += wi * e[idx];
            seg += wi * e[idx] * g;
            fs.push(fv);
            es.push(-e[idx]);
        }
    }
    if fs.is_empty() {
        return Err(Error::ZeroDistribution);
    }
    // E = e0 - c g in the weighted least-squares sense.
    let det = sw * sgg - sg * sg;
    let (e0, c) =
        if det.abs() > 1e-300 { ((se * sgg - seg * sg) / det, -(sw * seg - sg * se) / det) } else { (se / sw, 0.0) };
    let mut residual: f64 = 0.0;
    let mut gap = f64::INFINITY;
    for (idx, &fv) in dist.f.iter().enumerate() {
        if fv > 0.0 {
            residual = residual.max((e[idx] + c * fv.powf(1.0 / k) - e0).abs());
        } else {
            gap = gap.min(e[idx] - e0);
        }
    }
    let rank_correlation = if fs.len() > 1 { spearman(&fs, &es) } else { 1.0 };
    Ok(KktFit { e0, c, residual, rank_correlation, off_support_gap: gap })
}

/// How a descent run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimizerStatus {
    /// Energy decrease fell below the stall tolerance.
    Converged,
    /// No step size down to the minimum produced a decrease.
    LineSearchStalled,
    /// Energy never dropped below the mass: no concentrated minimizer at these constraints.
    SubThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub kkt_residual: f64,
}

/// Result of [`minimize_energy`]. Serializes as a phase-space state plus a `kkt` block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimizerResult {
    #[serde(flatten)]
    pub state: PhaseSpaceState,
    pub k: f64,
    pub energy: f64,
    pub mass: f64,
    pub lq_norm: f64,
    pub kkt: KktFit,
    pub iterations: usize,
    pub status: MinimizerStatus,
    /// Smallest energy among all states evaluated, accepted or not.
    pub min_probe_energy: f64,
    #[serde(skip)]
    pub field: GreensSolution,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

impl MinimizerResult {
    pub fn dist(&self) -> &Distribution {
        &self.state.dist
    }

    pub fn psi(&self) -> &[f64] {
        &self.state.phi
    }

    pub fn write_trace_csv<W: Write>(&self, mut w: W, header: Option<&str>) -> std::io::Result<()> {
        write_csv_header(&mut w, header, "iter,energy,kkt_residual")?;
        for t in &self.trace {
            writeln!(w, "{},{},{}", t.iter, fmt_f64(t.energy), fmt_f64(t.kkt_residual))?;
        }
        Ok(())
    }
}

/// Minimizes the reduced energy from a uniform box.
pub fn minimize_energy(m: f64, j: f64, k: f64, cfg: &VariationalConfig) -> Result<MinimizerResult> {
    let init = box_state(m, j, k, cfg)?;
    minimize_from(&init, m, j, k, cfg)
}

/// Minimizes the reduced energy starting from `initial`, which is first projected
/// onto the constraint set.
pub fn minimize_from(
    initial: &Distribution,
    m: f64,
    j: f64,
    k: f64,
    cfg: &VariationalConfig,
) -> Result<MinimizerResult> {
    check_k(k)?;
    check_targets(m, j)?;
    cfg.validate()?;
    let q = 1.0 + 1.0 / k;
    let mut dist = renormalize(initial, m, j, q)?.dist;
    let mut cur = reduced_energy(&dist, &cfg.greens)?;
    let mut min_probe = cur.energy;
    let mut history = vec![cur.energy];
    let mut trace = Vec::new();
    let mut status = None;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        let (wr, wp) = dist.weights()?;
        let w = cell_weights(&wr, &wp);
        let e = energy_table(&dist, &cur.field.psi);
        let (mu, c) = best_response(&e, &w, k, m, j)?;
        let g: Vec<f64> = dist.f.iter().map(|v| v.powf(1.0 / k)).collect();
        let gt: Vec<f64> = e.iter().map(|ei| (mu - ei).max(0.0) / c).collect();

        let mut tau = 1.0;
        let mut accepted = None;
        while tau >= cfg.min_step {
            let f: Vec<f64> = g.iter().zip(&gt).map(|(a, b)| ((1.0 - tau) * a + tau * b).powf(k)).collect();
            let trial = Distribution { r_grid: dist.r_grid.clone(), p_grid: dist.p_grid.clone(), f };
            let trial = renormalize(&trial, m, j, q)?.dist;
            let ev = reduced_energy(&trial, &cfg.greens)?;
            min_probe = min_probe.min(ev.energy);
            if ev.energy < cur.energy {
                accepted = Some((trial, ev));
                break;
            }
            tau *= 0.5;
        }
        let Some((d, ev)) = accepted else {
            status = Some(MinimizerStatus::LineSearchStalled);
            break;
        };
        iterations += 1;
        dist = d;
        cur = ev;
        history.push(cur.energy);
        let kkt = kkt_fit(&dist, &cur.field.psi, k)?;
        trace.push(TraceRow { iter: iterations, energy: cur.energy, kkt_residual: kkt.residual });
        log::debug!("descent step {iterations}: energy {:.12e}, tau {tau}", cur.energy);
        if history.len() > cfg.stall_window {
            let old = history[history.len() - 1 - cfg.stall_window];
            if old - cur.energy < cfg.stall_tol * cur.energy.abs() {
                status = Some(MinimizerStatus::Converged);
                break;
            }
        }
    }
    let mut status = match status {
        Some(s) => s,
        None => {
            return Err(Error::NotConverged { what: "energy descent".into(), iterations });
        }
    };
    if cur.energy >= m {
        log::warn!("energy {} did not drop below the mass {m}", cur.energy);
        status = MinimizerStatus::SubThreshold;
    }
    if dist.boundary_mass() > 0.0 {
        log::warn!("minimizer touches the grid boundary");
    }
    let kkt = kkt_fit(&dist, &cur.field.psi, k)?;
    let mass = dist.mass()?;
    let lq_norm = dist.lq_norm(q)?;
    let state = PhaseSpaceState::static_state(dist, cur.field.psi.clone())?;
    Ok(MinimizerResult {
        state,
        k,
        energy: cur.energy,
        mass,
        lq_norm,
        kkt,
        iterations,
        status,
        min_probe_energy: min_probe,
        field: cur.field,
        trace,
    })
}

/// Smooth radial cutoff: 1 on `[0, 1]`, 0 beyond 2.
pub fn bump(s: f64) -> f64 {
    let g = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let a = g(2.0 - s);
    let b = g(s - 1.0);
    a / (a + b)
}

fn bump_derivative(s: f64) -> f64 {
    if s <= 1.0 || s >= 2.0 {
        return 0.0;
    }
    let u = 2.0 - s;
    let v = s - 1.0;
    let a = (-1.0 / u).exp();
    let b = (-1.0 / v).exp();
    // a' = -a/u², b' = b/v²
    let da = -a / (u * u);
    let db = b / (v * v);
    (da * (a + b) - a * (da + db)) / ((a + b) * (a + b))
}

/// `K = ∫|∇ψ|²` of the cutoff [`bump`].
pub fn bump_dirichlet() -> f64 {
    let cfg = QuadratureConfig::default();
    integrate(|s| 4.0 * PI * s * s * bump_derivative(s).powi(2), 1.0, 2.0, &cfg).map(|e| e.value).unwrap_or(f64::NAN)
}

fn family_beta(gamma: f64, m: f64, j: f64, q: f64) -> f64 {
    let inner = (m / j).powf(q / (q - 1.0)) * (3.0 / (4.0 * PI)).powi(2);
    inner.cbrt() / gamma
}

/// One member of the box-and-bump family with its energy split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyEnergy {
    pub gamma: f64,
    pub alpha: f64,
    /// Spatial radius of the box.
    pub beta: f64,
    /// Height of the box.
    pub height: f64,
    pub kinetic: f64,
    pub field: f64,
    pub energy: f64,
    /// `e^{−α}M + ¾Mγ + α²βK`.
    pub bound: f64,
    pub k_bump: f64,
}

/// Energy of `f = h χ{|x| ≤ β} χ{|p| ≤ γ}` with `φ = −α ψ(x/β)`.
///
/// The box has mass `M` and `L^{1+1/k}` norm `J` for every `γ > 0`.
pub fn family_energy(gamma: f64, alpha: f64, m: f64, j: f64, k: f64) -> Result<FamilyEnergy> {
    check_k(k)?;
    check_targets(m, j)?;
    if !(gamma > 0.0) || !gamma.is_finite() || !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter("need gamma > 0 and alpha >= 0".into()));
    }
    let q = 1.0 + 1.0 / k;
    let height = (j.powf(q) / m).powf(1.0 / (q - 1.0));
    let beta = family_beta(gamma, m, j, q);
    let m2 = (-2.0 * alpha).exp();
    let cfg = QuadratureConfig::default();
    // Substitute p = γ t to keep the integrand O(1).
    let pint = integrate(|t| t * t * (m2 + gamma * gamma * t * t).sqrt(), 0.0, 1.0, &cfg)?.value * gamma.powi(3);
    let kinetic = height * (4.0 * PI / 3.0) * beta.powi(3) * 4.0 * PI * pint;
    let k_bump = bump_dirichlet();
    let field = 0.5 * alpha * alpha * beta * k_bump;
    let bound = (-alpha).exp() * m + 0.75 * m * gamma + alpha * alpha * beta * k_bump;
    Ok(FamilyEnergy { gamma, alpha, beta, height, kinetic, field, energy: kinetic + field, bound, k_bump })
}

/// Total energy of the box-and-bump family member.
pub fn test_family_energy(gamma: f64, alpha: f64, m: f64, j: f64, k: f64) -> Result<f64> {
    Ok(family_energy(gamma, alpha, m, j, k)?.energy)
}

/// The constant `A(M, J)` whose size decides whether the family beats `M`.
pub fn family_gain(m: f64, j: f64, k: f64) -> Result<f64> {
    check_k(k)?;
    check_targets(m, j)?;
    let q = 1.0 + 1.0 / k;
    let kb = bump_dirichlet();
    Ok((4.0f64 / 3.0).powf(5.0 / 6.0) * (PI / 8.0).cbrt() / kb.sqrt()
        * j.powf(q / (6.0 * q - 6.0))
        * m.powf((2.0 * q - 3.0) / (6.0 * q - 6.0)))
}

/// Mass above which `A > 1`.
pub fn family_mass_threshold(j: f64, k: f64) -> Result<f64> {
    check_k(k)?;
    if !(j > 0.0) {
        return Err(Error::InvalidParameter("J must be positive".into()));
    }
    let q = 1.0 + 1.0 / k;
    let kb = bump_dirichlet();
    let inner =
        0.75f64.powf(5.0 * (q - 1.0)) * (8.0 / PI).powf(2.0 * (q - 1.0)) * kb.powf(3.0 * (q - 1.0)) * j.powf(-q);
    Ok(inner.powf(1.0 / (2.0 * q - 3.0)))
}

/// Family member with `α = ln A` and `γ(α)` chosen to balance the bound.
///
/// Meaningful only when `A > 1`; then the energy is at most `A⁻¹(1 + ln A)M < M`.
pub fn optimized_family(m: f64, j: f64, k: f64) -> Result<FamilyEnergy> {
    let a = family_gain(m, j, k)?;
    if !(a > 1.0) {
        return Err(Error::InvalidParameter(format!("mass {m} is below the family threshold (A = {a})")));
    }
    let q = 1.0 + 1.0 / k;
    let alpha = a.ln();
    let kb = bump_dirichlet();
    let inner = (m / j).powf(q / (q - 1.0)) * (3.0 / (4.0 * PI)).powi(2);
    let gamma = (4.0 * kb / (3.0 * m)).sqrt() * inner.powf(1.0 / 6.0) * alpha;
    family_energy(gamma, alpha, m, j, k)
}

/// Maps `(f, φ)` of mass `M₁` to `(β²f(β·, p), φ(β·))` of mass `M₂`, `β = M₁/M₂`.
///
/// For a static state the energy scales by exactly `M₂/M₁` and the
/// `L^{1+1/k}` norm by `(M₁/M₂)^{(2−k)/(1+k)}`. The time derivative of the
/// field is carried over unchanged.
pub fn scaling_transport(state: &PhaseSpaceState, m2: f64) -> Result<PhaseSpaceState> {
    if !(m2 > 0.0) || !m2.is_finite() {
        return Err(Error::InvalidParameter(format!("target mass must be positive, got {m2}")));
    }
    state.validate()?;
    let m1 = state.dist.mass()?;
    if m1 <= 0.0 {
        return Err(Error::ZeroDistribution);
    }
    let beta = m1 / m2;
    let alpha = beta * beta;
    let dist = Distribution {
        r_grid: state.dist.r_grid.iter().map(|r| r / beta).collect(),
        p_grid: state.dist.p_grid.clone(),
        f: state.dist.f.iter().map(|v| v * alpha).collect(),
    };
    PhaseSpaceState::new(dist, state.phi.clone(), state.phi_t.clone())
}
