//! Spherically symmetric phase-space states and the scalar functionals on them.
//!
//! A state stores `f(|x|, |p|)` on a tensor grid together with the potential
//! `φ(|x|)` and its time derivative. Every integral uses composite Simpson
//! weights for the measures `4πr² dr` and `4πp² dp`. The field energy adds the
//! exterior contribution of a harmonic tail `φ ∝ 1/r` matched to the slope at
//! the last radial node.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{ball_weights, check_increasing};

/// Gridded isotropic distribution `f(r, p)`, stored row-major (one row per radius).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRepr", into = "DistributionRepr")]
pub struct Distribution {
    pub r_grid: Vec<f64>,
    pub p_grid: Vec<f64>,
    pub f: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DistributionRepr {
    r_grid: Vec<f64>,
    p_grid: Vec<f64>,
    f: Vec<Vec<f64>>,
}

fn flatten_rows(rows: Vec<Vec<f64>>, np: usize) -> Result<Vec<f64>> {
    if let Some(bad) = rows.iter().position(|r| r.len() != np) {
        return Err(Error::Shape(format!("row {bad} of f does not match p_grid")));
    }
    Ok(rows.into_iter().flatten().collect())
}

fn nest_rows(f: &[f64], np: usize) -> Vec<Vec<f64>> {
    if np == 0 {
        return Vec::new();
    }
    f.chunks(np).map(<[f64]>::to_vec).collect()
}

impl TryFrom<DistributionRepr> for Distribution {
    type Error = Error;
    fn try_from(r: DistributionRepr) -> Result<Self> {
        let f = flatten_rows(r.f, r.p_grid.len())?;
        Distribution::new(r.r_grid, r.p_grid, f)
    }
}

impl From<Distribution> for DistributionRepr {
    fn from(d: Distribution) -> Self {
        let f = nest_rows(&d.f, d.p_grid.len());
        DistributionRepr { r_grid: d.r_grid, p_grid: d.p_grid, f }
    }
}

impl Distribution {
    pub fn new(r_grid: Vec<f64>, p_grid: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        let d = Self { r_grid, p_grid, f };
        d.validate()?;
        Ok(d)
    }

    /// Samples `f(r, p)` on the tensor grid.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(r_grid: Vec<f64>, p_grid: Vec<f64>, f: F) -> Result<Self> {
        let mut vals = Vec::with_capacity(r_grid.len() * p_grid.len());
        for &r in &r_grid {
            for &p in &p_grid {
                vals.push(f(r, p));
            }
        }
        Self::new(r_grid, p_grid, vals)
    }

    pub fn zeros(r_grid: Vec<f64>, p_grid: Vec<f64>) -> Result<Self> {
        let n = r_grid.len() * p_grid.len();
        Self::new(r_grid, p_grid, vec![0.0; n])
    }

    pub fn nr(&self) -> usize {
        self.r_grid.len()
    }

    pub fn np(&self) -> usize {
        self.p_grid.len()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.f[i * self.np() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let np = self.np();
        &self.f[i * np..(i + 1) * np]
    }

    pub fn validate(&self) -> Result<()> {
        check_increasing(&self.r_grid, "r_grid")?;
        check_increasing(&self.p_grid, "p_grid")?;
        if self.r_grid[0] <= 0.0 {
            return Err(Error::InvalidGrid("radii must be strictly positive".into()));
        }
        if self.p_grid[0] < 0.0 {
            return Err(Error::InvalidGrid("momenta must be nonnegative".into()));
        }
        if self.f.len() != self.nr() * self.np() {
            return Err(Error::Shape(format!("f has {} values for a {}x{} grid", self.f.len(), self.nr(), self.np())));
        }
        if let Some(v) = self.f.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("distribution value {v}")));
        }
        if self.f.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidParameter("distribution has negative values".into()));
        }
        Ok(())
    }

    /// Quadrature weights for `4πr² dr` and `4πp² dp`.
    pub fn weights(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((ball_weights(&self.r_grid)?, ball_weights(&self.p_grid)?))
    }

    /// `∫∫ g(i, j) f dp dx` with `g` evaluated at grid indices.
    pub fn integrate_with<G: Fn(usize, usize) -> f64>(&self, g: G) -> Result<f64> {
        let (wr, wp) = self.weights()?;
        Ok(self.integrate_weighted(&wr, &wp, g))
    }

    pub(crate) fn integrate_weighted<G: Fn(usize, usize) -> f64>(&self, wr: &[f64], wp: &[f64], g: G) -> f64 {
        let np = self.np();
        let mut total = 0.0;
        for (i, w) in wr.iter().enumerate() {
            let row = &self.f[i * np..(i + 1) * np];
            let mut inner = 0.0;
            for j in 0..np {
                if row[j] != 0.0 {
                    inner += wp[j] * g(i, j) * row[j];
                }
            }
            total += w * inner;
        }
        total
    }

    pub fn mass(&self) -> Result<f64> {
        self.integrate_with(|_, _| 1.0)
    }

    /// `‖f‖_{L^q}` over the grid.
    pub fn lq_norm(&self, q: f64) -> Result<f64> {
        let (wr, wp) = self.weights()?;
        Ok(lq_norm_weighted(self, &wr, &wp, q))
    }

    /// Pointwise multiple `λ f`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            r_grid: self.r_grid.clone(),
            p_grid: self.p_grid.clone(),
            f: self.f.iter().map(|v| v * lambda).collect(),
        }
    }

    /// Mass carried by the outermost radial row and the last momentum column.
    pub fn boundary_mass(&self) -> f64 {
        let nr = self.nr();
        let np = self.np();
        let edge_r: f64 = self.row(nr - 1).iter().sum();
        let edge_p: f64 = (0..nr).map(|i| self.at(i, np - 1)).sum();
        edge_r + edge_p
    }
}

pub(crate) fn lq_norm_weighted(d: &Distribution, wr: &[f64], wp: &[f64], q: f64) -> f64 {
    d.integrate_weighted(wr, wp, |i, j| d.at(i, j).powf(q - 1.0)).powf(1.0 / q)
}

/// Distribution together with `φ` and `∂tφ` sampled on its radial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateRepr", into = "StateRepr")]
pub struct PhaseSpaceState {
    pub dist: Distribution,
    pub phi: Vec<f64>,
    pub phi_t: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    r_grid: Vec<f64>,
    p_grid: Vec<f64>,
    f: Vec<Vec<f64>>,
    phi: Vec<f64>,
    #[serde(default)]
    phi_t: Vec<f64>,
}

impl TryFrom<StateRepr> for PhaseSpaceState {
    type Error = Error;
    fn try_from(r: StateRepr) -> Result<Self> {
        let f = flatten_rows(r.f, r.p_grid.len())?;
        let dist = Distribution::new(r.r_grid, r.p_grid, f)?;
        let phi_t = if r.phi_t.is_empty() { vec![0.0; r.phi.len()] } else { r.phi_t };
        PhaseSpaceState::new(dist, r.phi, phi_t)
    }
}

impl From<PhaseSpaceState> for StateRepr {
    fn from(s: PhaseSpaceState) -> Self {
        let f = nest_rows(&s.dist.f, s.dist.np());
        StateRepr { r_grid: s.dist.r_grid, p_grid: s.dist.p_grid, f, phi: s.phi, phi_t: s.phi_t }
    }
}

impl PhaseSpaceState {
    pub fn new(dist: Distribution, phi: Vec<f64>, phi_t: Vec<f64>) -> Result<Self> {
        let s = Self { dist, phi, phi_t };
        s.validate()?;
        Ok(s)
    }

    /// State with `∂tφ ≡ 0`.
    pub fn static_state(dist: Distribution, phi: Vec<f64>) -> Result<Self> {
        let n = phi.len();
        Self::new(dist, phi, vec![0.0; n])
    }

    pub fn validate(&self) -> Result<()> {
        self.dist.validate()?;
        let nr = self.dist.nr();
        if nr < 3 {
            return Err(Error::InvalidGrid("at least three radial nodes are required".into()));
        }
        if self.dist.np() < 2 {
            return Err(Error::InvalidGrid("at least two momentum nodes are required".into()));
        }
        if self.phi.len() != nr || self.phi_t.len() != nr {
            return Err(Error::Shape("phi and phi_t must match r_grid".into()));
        }
        if self.phi.iter().chain(&self.phi_t).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("potential".into()));
        }
        Ok(())
    }

    pub fn is_static(&self) -> bool {
        self.phi_t.iter().all(|&v| v == 0.0)
    }
}

/// Radial derivative of samples on a nonuniform grid.
///
/// Interior nodes use the three-point second-order stencil. The first node
/// uses the even fit `φ ≈ A + Br²` (regular at the center), the last node a
/// one-sided three-point stencil.
pub fn radial_gradient(r: &[f64], phi: &[f64]) -> Result<Vec<f64>> {
    check_increasing(r, "r_grid")?;
    let n = r.len();
    if n < 3 || phi.len() != n {
        return Err(Error::Shape("gradient needs at least three matching samples".into()));
    }
    let mut d = vec![0.0; n];
    d[0] = 2.0 * r[0] * (phi[1] - phi[0]) / (r[1] * r[1] - r[0] * r[0]);
    for i in 1..n - 1 {
        let h0 = r[i] - r[i - 1];
        let h1 = r[i + 1] - r[i];
        d[i] =
            -h1 / (h0 * (h0 + h1)) * phi[i - 1] + (h1 - h0) / (h0 * h1) * phi[i] + h0 / (h1 * (h0 + h1)) * phi[i + 1];
    }
    let h1 = r[n - 1] - r[n - 2];
    let h0 = r[n - 2] - r[n - 3];
    d[n - 1] = h1 / (h0 * (h0 + h1)) * phi[n - 3] - (h0 + h1) / (h0 * h1) * phi[n - 2]
        + (2.0 * h1 + h0) / (h1 * (h0 + h1)) * phi[n - 1];
    Ok(d)
}

/// `½∫_R^∞ |∇φ|² dx` for the harmonic continuation with slope `dphi` at `R`.
pub fn exterior_field_energy(r_edge: f64, dphi: f64) -> f64 {
    2.0 * PI * r_edge.powi(3) * dphi * dphi
}

/// Scalar functionals of a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub mass: f64,
    pub e_kin: f64,
    pub e_field: f64,
    /// Part of `e_field` carried by the exterior harmonic tail.
    pub e_field_exterior: f64,
    pub e_field_t: f64,
    pub hamiltonian: f64,
    pub q: f64,
    pub lq_norm: f64,
    pub conformal: f64,
    /// True when the field does not decay inside the grid, so the conformal
    /// energy depends on where the grid is cut.
    pub conformal_truncated: bool,
    pub q0: f64,
    pub virial_lhs: f64,
    pub virial_rhs: f64,
    /// True when `f` does not vanish on the outer grid edges.
    pub boundary_warning: bool,
}

/// Local energy, radial momentum and stress trace on the radial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalDensities {
    pub r: Vec<f64>,
    pub e: Vec<f64>,
    pub q_r: Vec<f64>,
    pub tau_trace: Vec<f64>,
    /// Field energy outside the grid, not represented by `e`.
    pub e_exterior: f64,
}

impl LocalDensities {
    /// `∫ e dx` plus the exterior field energy.
    pub fn total_energy(&self) -> Result<f64> {
        let w = ball_weights(&self.r)?;
        Ok(w.iter().zip(&self.e).map(|(w, e)| w * e).sum::<f64>() + self.e_exterior)
    }
}

struct Pieces {
    wr: Vec<f64>,
    wp: Vec<f64>,
    dphi: Vec<f64>,
    kinetic: Vec<f64>,
    pressure: Vec<f64>,
}

fn pieces(state: &PhaseSpaceState) -> Result<Pieces> {
    state.validate()?;
    let d = &state.dist;
    let (wr, wp) = d.weights()?;
    let dphi = radial_gradient(&d.r_grid, &state.phi)?;
    let np = d.np();
    let mut kinetic = Vec::with_capacity(d.nr());
    let mut pressure = Vec::with_capacity(d.nr());
    for i in 0..d.nr() {
        let m2 = (2.0 * state.phi[i]).exp();
        let row = d.row(i);
        let (mut k, mut p) = (0.0, 0.0);
        for j in 0..np {
            if row[j] == 0.0 {
                continue;
            }
            let p2 = d.p_grid[j] * d.p_grid[j];
            let e = (m2 + p2).sqrt();
            k += wp[j] * e * row[j];
            p += wp[j] * p2 / e * row[j];
        }
        if !k.is_finite() || !p.is_finite() {
            return Err(Error::NonFinite(format!("momentum integral at radial node {i}")));
        }
        kinetic.push(k);
        pressure.push(p);
    }
    Ok(Pieces { wr, wp, dphi, kinetic, pressure })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Evaluates every scalar functional of `state` with `L^q` exponent `q`.
pub fn compute_functionals(state: &PhaseSpaceState, q: f64) -> Result<FunctionalReport> {
    if !(q > 1.0) || !q.is_finite() {
        return Err(Error::InvalidParameter(format!("q must exceed 1, got {q}")));
    }
    let pc = pieces(state)?;
    let d = &state.dist;
    let r = &d.r_grid;
    let nr = d.nr();

    let mass = d.integrate_weighted(&pc.wr, &pc.wp, |_, _| 1.0);
    let e_kin = dot(&pc.wr, &pc.kinetic);
    let grad2: Vec<f64> = pc.dphi.iter().map(|g| g * g).collect();
    let e_exterior = exterior_field_energy(r[nr - 1], pc.dphi[nr - 1]);
    let e_field = 0.5 * dot(&pc.wr, &grad2) + e_exterior;
    let phit2: Vec<f64> = state.phi_t.iter().map(|g| g * g).collect();
    let e_field_t = 0.5 * dot(&pc.wr, &phit2);
    let hamiltonian = e_kin + e_field + e_field_t;
    let lq_norm = lq_norm_weighted(d, &pc.wr, &pc.wp, q);

    let local_e: Vec<f64> = (0..nr).map(|i| pc.kinetic[i] + 0.5 * grad2[i] + 0.5 * phit2[i]).collect();
    let conformal: f64 = (0..nr).map(|i| pc.wr[i] * r[i] * r[i] * local_e[i]).sum();
    let scale = pc.dphi.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let conformal_truncated = pc.dphi[nr - 1].abs() > 1e-8 * scale.max(f64::MIN_POSITIVE);
    let q0: f64 = (0..nr)
        .map(|i| {
            let x_dot_q = -r[i] * state.phi_t[i] * pc.dphi[i];
            pc.wr[i] * (x_dot_q - state.phi[i] * state.phi_t[i])
        })
        .sum();
    let virial_rhs = dot(&pc.wr, &pc.pressure);
    let boundary_warning = d.boundary_mass() > 0.0;
    if boundary_warning {
        log::warn!("distribution does not vanish on the grid boundary; functionals are truncated");
    }

    let report = FunctionalReport {
        mass,
        e_kin,
        e_field,
        e_field_exterior: e_exterior,
        e_field_t,
        hamiltonian,
        q,
        lq_norm,
        conformal,
        conformal_truncated,
        q0,
        virial_lhs: e_field,
        virial_rhs,
        boundary_warning,
    };
    for (name, v) in [
        ("mass", mass),
        ("e_kin", e_kin),
        ("e_field", e_field),
        ("lq_norm", lq_norm),
        ("conformal", conformal),
        ("q0", q0),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite(name.into()));
        }
    }
    Ok(report)
}

/// Local energy density, radial momentum density and stress trace.
pub fn local_densities(state: &PhaseSpaceState) -> Result<LocalDensities> {
    let pc = pieces(state)?;
    let r = &state.dist.r_grid;
    let nr = r.len();
    let mut e = Vec::with_capacity(nr);
    let mut q_r = Vec::with_capacity(nr);
    let mut tau = Vec::with_capacity(nr);
    for i in 0..nr {
        let g2 = pc.dphi[i] * pc.dphi[i];
        let t2 = state.phi_t[i] * state.phi_t[i];
        e.push(pc.kinetic[i] + 0.5 * g2 + 0.5 * t2);
        q_r.push(-state.phi_t[i] * pc.dphi[i]);
        tau.push(pc.pressure[i] - 0.5 * g2 + 1.5 * t2);
    }
    Ok(LocalDensities {
        r: r.clone(),
        e,
        q_r,
        tau_trace: tau,
        e_exterior: exterior_field_energy(r[nr - 1], pc.dphi[nr - 1]),
    })
}

/// Relative gap between the two sides of the virial identity for a static state.
pub fn virial_residual(state: &PhaseSpaceState) -> Result<f64> {
    if !state.is_static() {
        return Err(Error::InvalidParameter("virial residual needs a static state".into()));
    }
    let rep = compute_functionals(state, 2.0)?;
    let (l, r) = (rep.virial_lhs, rep.virial_rhs);
    let m = l.max(r);
    if m == 0.0 {
        return Ok(0.0);
    }
    Ok((l - r).abs() / m)
}

/// Optimal constant `(2/√3) π^{-2/3}` of `‖φ‖_{L⁶} ≤ η ‖∇φ‖_{L²}` in three dimensions.
pub fn sobolev_constant() -> f64 {
    2.0 / 3f64.sqrt() * PI.powf(-2.0 / 3.0)
}

/// `‖φ‖_{L⁶} / ‖∇φ‖_{L²}` for a radial profile.
///
/// Beyond the last node the profile is continued by `φ(R)·R/r`, so a profile
/// that has not decayed to zero is treated as a Coulomb tail.
pub fn sobolev_ratio(r: &[f64], phi: &[f64]) -> Result<f64> {
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("potential".into()));
    }
    let d = radial_gradient(r, phi)?;
    let w = ball_weights(r)?;
    let n = r.len();
    let (rr, pr) = (r[n - 1], phi[n - 1]);
    let l6 = w.iter().zip(phi).map(|(w, p)| w * p.powi(6)).sum::<f64>() + 4.0 * PI / 3.0 * pr.powi(6) * rr.powi(3);
    let g2 = w.iter().zip(&d).map(|(w, g)| w * g * g).sum::<f64>() + 4.0 * PI * pr * pr * rr;
    if g2 <= 0.0 {
        return Err(Error::ZeroGradient);
    }
    Ok(l6.powf(1.0 / 6.0) / g2.sqrt())
}
