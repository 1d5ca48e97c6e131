//! Physical steady states assembled from scaled shooting profiles.
//!
//! A scaled profile `ψ̃` with crossing `r̃₀` determines `E₀ = exp(−r̃₀ψ̃'(r̃₀))`.
//! For a given `c` the physical potential is `φ(r) = ψ̃(r/b) + ln E₀` with
//! `b = c^{k/2} E₀^{−2−k/2}`, and the distribution is `((E₀ − E)/c)₊^k`.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{Distribution, PhaseSpaceState};
use crate::io::{fmt_f64, write_csv_header};
use crate::momentum_integrals::{polytrope_moment, rho_scaled_with, Moment, PolytropeParams};
use crate::quadrature::{ball_weights, cumulative_trapezoid, integrate, kronrod15, QuadratureConfig};
use crate::radial_ode::{
    find_threshold, integrate_scaled, integrate_scaled_with_table, table_for, ScaledProfile, SolverConfig,
};

/// `E₀ = exp(−r̃₀ ψ̃'(r̃₀))` from the crossing data of a scaled profile.
pub fn e0_from_profile(profile: &ScaledProfile) -> Result<f64> {
    let (r0, d) = match (profile.r0, profile.dpsi_at_r0) {
        (Some(r), Some(d)) => (r, d),
        _ => return Err(Error::NoCrossing("profile has no crossing".into())),
    };
    let s = r0 * d;
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidParameter(format!("exterior slope must be positive, got {d}")));
    }
    Ok((-s).exp())
}

/// Length scale `b = c^{k/2} / E₀^{2+k/2}`.
pub fn length_scale(k: f64, e0: f64, c: f64) -> f64 {
    c.powf(0.5 * k) / e0.powf(2.0 + 0.5 * k)
}

/// Physical potential, support and global integrals of a polytrope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhysicalProfile {
    pub params: PolytropeParams,
    pub b: f64,
    pub r_nodes: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub support_radius: f64,
    /// `‖f₀‖₁` by quadrature in physical variables.
    pub mass: f64,
    /// `‖f₀‖_{1+1/k}`.
    pub lq_norm: f64,
    pub kinetic_energy: f64,
    /// `½∫|∇φ₀|² dx`, exterior included.
    pub field_energy: f64,
    /// `∫∫ |p|²/E f₀ dp dx`.
    pub pressure_integral: f64,
    /// Energy `𝓔(f₀, φ₀)`.
    pub i_estimate: f64,
    pub dphi_at_support: f64,
    /// Scaled mass multiplied by `b/E₀`.
    pub mass_from_scaled: Option<f64>,
    /// Factor applied to the potential (1 for a genuine solution).
    pub phi_factor: f64,
    #[serde(skip)]
    scaled: Option<ScaledProfile>,
}

impl PhysicalProfile {
    pub fn e0(&self) -> f64 {
        self.params.e0
    }

    pub fn k(&self) -> f64 {
        self.params.k
    }

    /// `(φ, φ')` at physical radius `r`.
    pub fn phi_at(&self, r: f64) -> (f64, f64) {
        let ln_e0 = self.params.e0.ln();
        let s = self.phi_factor;
        if let Some(p) = &self.scaled {
            if let Some((u, du)) = p.eval(r / self.b) {
                return (s * (u + ln_e0), s * du / self.b);
            }
        }
        let n = self.r_nodes.len();
        if r >= self.r_nodes[n - 1] {
            // vacuum continuation of the last node
            let (rn, pn, dn) = (self.r_nodes[n - 1], self.phi[n - 1], self.dphi[n - 1]);
            let q = dn * rn * rn;
            return (pn + q * (1.0 / rn - 1.0 / r), q / (r * r));
        }
        if r <= self.r_nodes[0] {
            return (self.phi[0], self.dphi[0]);
        }
        let i = self.r_nodes.partition_point(|&x| x < r).clamp(1, n - 1) - 1;
        let (x0, x1) = (self.r_nodes[i], self.r_nodes[i + 1]);
        let h = x1 - x0;
        let t = (r - x0) / h;
        let (y0, y1, d0, d1) = (self.phi[i], self.phi[i + 1], self.dphi[i], self.dphi[i + 1]);
        let (t2, t3) = (t * t, t * t * t);
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * d1;
        let dv = ((6.0 * t2 - 6.0 * t) * (y0 - y1)) / h + (3.0 * t2 - 4.0 * t + 1.0) * d0 + (3.0 * t2 - 2.0 * t) * d1;
        (v, dv)
    }

    /// Distribution value at radius `r` and momentum `p`.
    pub fn f_at(&self, r: f64, p: f64) -> f64 {
        let (phi, _) = self.phi_at(r);
        self.params.f_of_energy(((2.0 * phi).exp() + p * p).sqrt())
    }

    /// Mass density `∫ f₀ dp` at radius `r`.
    pub fn rho_at(&self, r: f64) -> Result<f64> {
        let (phi, _) = self.phi_at(r);
        polytrope_moment(phi, &self.params, Moment::Density, &QuadratureConfig::default())
    }

    /// Distribution sampled on `r_i = iR/n_r` and `p_j` uniform on `[0, p_max]`.
    pub fn distribution(&self, nr: usize, np: usize) -> Result<Distribution> {
        if nr < 3 || np < 2 {
            return Err(Error::InvalidGrid("need at least 3 radial and 2 momentum nodes".into()));
        }
        let rs = self.support_radius;
        let r: Vec<f64> = (1..=nr).map(|i| rs * i as f64 / nr as f64).collect();
        let phi0 = self.phi_at(r[0]).0;
        let e0 = self.params.e0;
        let pmax = (e0 * e0 - (2.0 * phi0).exp()).max(0.0).sqrt();
        let p: Vec<f64> = (0..np).map(|j| pmax * j as f64 / (np - 1) as f64).collect();
        Distribution::from_fn(r, p, |r, p| self.f_at(r, p))
    }

    /// Static phase-space state on the grid of [`PhysicalProfile::distribution`].
    pub fn phase_space_state(&self, nr: usize, np: usize) -> Result<PhaseSpaceState> {
        let d = self.distribution(nr, np)?;
        let phi = d.r_grid.iter().map(|&r| self.phi_at(r).0).collect();
        PhaseSpaceState::static_state(d, phi)
    }

    /// Same scaled solution with the potential multiplied by `factor`.
    ///
    /// The support radius, distribution and all integrals are recomputed for
    /// the altered potential while `E₀` and `c` are kept.
    pub fn perturbed(&self, factor: f64) -> Result<PhysicalProfile> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::InvalidParameter(format!("perturbation factor must be positive, got {factor}")));
        }
        let mut p = self.clone();
        p.phi_factor *= factor;
        p.phi.iter_mut().for_each(|v| *v *= factor);
        p.dphi.iter_mut().for_each(|v| *v *= factor);
        let ln_e0 = p.params.e0.ln();
        let (mut lo, mut hi) = (0.0, self.r_nodes[self.r_nodes.len() - 1]);
        if p.phi_at(hi).0 <= ln_e0 {
            return Err(Error::NoCrossing("perturbed potential stays inside the well".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if p.phi_at(mid).0 <= ln_e0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        p.support_radius = 0.5 * (lo + hi);
        p.mass_from_scaled = None;
        p.compute_integrals()?;
        Ok(p)
    }

    fn radial_integral<F: Fn(f64) -> Result<f64> + Sync>(&self, g: F) -> Result<f64> {
        let rs = self.support_radius;
        let mut edges: Vec<f64> = self.r_nodes.iter().copied().filter(|&r| r > 0.0 && r < rs).collect();
        edges.insert(0, 0.0);
        edges.push(rs);
        windowed_integral(&edges, |r| Ok(4.0 * PI * r * r * g(r)?))
    }

    fn compute_integrals(&mut self) -> Result<()> {
        let cfg = QuadratureConfig { abs_tol: 1e-14, ..QuadratureConfig::default() };
        let params = self.params;
        let moment = |m: Moment| {
            let this = &*self;
            move |r: f64| polytrope_moment(this.phi_at(r).0, &params, m, &cfg)
        };
        let mass = self.radial_integral(moment(Moment::Density))?;
        let lq = self.radial_integral(moment(Moment::Power(params.q())))?;
        let kin = self.radial_integral(moment(Moment::Energy))?;
        let pres = self.radial_integral(moment(Moment::Pressure))?;
        let grad = self.radial_integral(|r| Ok(self.phi_at(r).1.powi(2)))?;
        let rs = self.support_radius;
        let d_rs = self.phi_at(rs).1;
        let field = 0.5 * (grad + 4.0 * PI * rs.powi(3) * d_rs * d_rs);
        self.mass = mass;
        self.lq_norm = lq.powf(1.0 / params.q());
        self.kinetic_energy = kin;
        self.pressure_integral = pres;
        self.field_energy = field;
        self.i_estimate = kin + field;
        self.dphi_at_support = d_rs;
        Ok(())
    }

    /// Writes `r,phi,rho` at the stored nodes.
    pub fn write_csv<W: Write>(&self, mut w: W, header: Option<&str>) -> std::io::Result<()> {
        write_csv_header(&mut w, header, "r,phi,rho")?;
        for (r, phi) in self.r_nodes.iter().zip(&self.phi) {
            let rho = self.rho_at(*r).unwrap_or(f64::NAN);
            writeln!(w, "{},{},{}", fmt_f64(*r), fmt_f64(*phi), fmt_f64(rho))?;
        }
        Ok(())
    }
}

/// Maps a scaled profile to physical variables for the constant `c`.
pub fn scale_to_physical(profile: &ScaledProfile, c: f64) -> Result<PhysicalProfile> {
    let e0 = e0_from_profile(profile)?;
    let params = PolytropeParams::new(profile.k, e0, c)?;
    let b = length_scale(profile.k, e0, c);
    let ln_e0 = e0.ln();
    let r0 = profile.r0.expect("checked by e0_from_profile");
    let mut phys = PhysicalProfile {
        params,
        b,
        r_nodes: profile.r_nodes.iter().map(|r| r * b).collect(),
        phi: profile.psi.iter().map(|u| u + ln_e0).collect(),
        dphi: profile.dpsi.iter().map(|d| d / b).collect(),
        support_radius: b * r0,
        mass: 0.0,
        lq_norm: 0.0,
        kinetic_energy: 0.0,
        field_energy: 0.0,
        pressure_integral: 0.0,
        i_estimate: 0.0,
        dphi_at_support: 0.0,
        mass_from_scaled: profile.mass_accumulated.map(|m| m * b / e0),
        phi_factor: 1.0,
        scaled: Some(profile.clone()),
    };
    phys.compute_integrals()?;
    Ok(phys)
}

/// Scaled mass by two independent routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledMass {
    /// Nested quadrature over the continuous profile.
    pub nested: f64,
    /// Value of the accumulator integrated alongside the field equation.
    pub accumulated: f64,
}

impl ScaledMass {
    pub fn relative_gap(&self) -> f64 {
        (self.nested - self.accumulated).abs() / self.nested.abs().max(f64::MIN_POSITIVE)
    }
}

/// `∫ g` over consecutive windows of `edges`, evaluated in parallel.
///
/// A fixed-rule pass estimates the total; each window then gets an absolute
/// tolerance proportional to it, so small windows do not chase digits that the
/// total cannot resolve.
fn windowed_integral<G: Fn(f64) -> Result<f64> + Sync>(edges: &[f64], g: G) -> Result<f64> {
    let call = |r: f64, err: &mut Option<Error>| match g(r) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    };
    let rough: Result<Vec<f64>> = edges
        .par_windows(2)
        .map(|w| {
            let mut err = None;
            let v = kronrod15(|r| call(r, &mut err), w[0], w[1])?;
            err.map_or(Ok(v.abs()), Err)
        })
        .collect();
    let scale: f64 = rough?.iter().sum();
    let windows = edges.len().saturating_sub(1).max(1) as f64;
    let cfg = QuadratureConfig {
        abs_tol: (1e-13 * scale / windows).max(1e-300),
        rel_tol: 1e-12,
        max_depth: 30,
        max_intervals: 100_000,
    };
    let parts: Result<Vec<f64>> = edges
        .par_windows(2)
        .map(|w| {
            let mut err = None;
            let v = integrate(|r| call(r, &mut err), w[0], w[1], &cfg)?.value;
            err.map_or(Ok(v), Err)
        })
        .collect();
    Ok(parts?.iter().sum())
}

/// `‖f̃‖₁ = ∫₀^{r̃₀} 4πr² ρ̃(ψ̃(r)) dr` computed two ways.
pub fn scaled_mass(profile: &ScaledProfile) -> Result<ScaledMass> {
    let r0 = profile.r0.ok_or_else(|| Error::NoCrossing("profile has no crossing".into()))?;
    let accumulated = profile
        .mass_accumulated
        .ok_or_else(|| Error::InvalidParameter("profile carries no mass accumulator".into()))?;
    let k = profile.k;
    let inner = QuadratureConfig::default();
    let mut edges: Vec<f64> = profile.r_nodes.iter().copied().filter(|&r| r < r0).collect();
    edges.push(r0);
    let nested = windowed_integral(&edges, |r| {
        let u = profile.eval(r).map(|v| v.0).unwrap_or(f64::NAN);
        Ok(4.0 * PI * r * r * rho_scaled_with(u, k, &inner)?)
    })?;
    Ok(ScaledMass { nested, accumulated })
}

/// One row of a shooting sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub a: f64,
    pub r0: f64,
    pub dpsi_r0: f64,
    pub e0: f64,
    pub scaled_mass: f64,
    pub physical_mass: f64,
    /// Row lies on the shallow side of the detected threshold.
    pub admissible: bool,
}

/// Tabulated crossing data and masses across shooting parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub k: f64,
    pub c: f64,
    pub rows: Vec<SweepRow>,
    /// Regime boundary `a*`, when it lies strictly inside the sweep.
    pub threshold: Option<f64>,
    /// Pairs `(a_i, a_j)` of admissible rows whose masses are not strictly
    /// decreasing in `E₀`.
    pub violations: Vec<(f64, f64)>,
}

impl SweepResult {
    pub fn is_monotone(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W, header: Option<&str>) -> std::io::Result<()> {
        write_csv_header(&mut w, header, "a,r0,dpsi_r0,e0,scaled_mass,physical_mass")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_f64(r.a),
                fmt_f64(r.r0),
                fmt_f64(r.dpsi_r0),
                fmt_f64(r.e0),
                fmt_f64(r.scaled_mass),
                fmt_f64(r.physical_mass)
            )?;
        }
        Ok(())
    }
}

/// Physical mass from a scaled profile by direct radial quadrature of the density.
pub fn physical_mass(profile: &ScaledProfile, c: f64) -> Result<f64> {
    let e0 = e0_from_profile(profile)?;
    let params = PolytropeParams::new(profile.k, e0, c)?;
    let b = length_scale(profile.k, e0, c);
    let r0 = profile.r0.expect("checked");
    let ln_e0 = e0.ln();
    let inner = QuadratureConfig::default();
    let mut edges: Vec<f64> = profile.r_nodes.iter().copied().filter(|&r| r < r0).map(|r| r * b).collect();
    edges.insert(0, 0.0);
    edges.push(r0 * b);
    windowed_integral(&edges, |r| {
        let u = profile.eval(r / b).map(|v| v.0).unwrap_or(f64::NAN);
        Ok(4.0 * PI * r * r * polytrope_moment(u + ln_e0, &params, Moment::Density, &inner)?)
    })
}

/// Sweeps shooting parameters, recording crossing data and masses.
///
/// Rows are sorted by `a`. When the crossing radius has an interior minimum the
/// regime boundary is refined by [`find_threshold`] and rows above it are
/// marked admissible; physical mass must then decrease strictly in `E₀`
/// across admissible rows.
pub fn mass_curve(k: f64, a_list: &[f64], c: f64, config: &SolverConfig) -> Result<SweepResult> {
    if a_list.is_empty() {
        return Err(Error::InvalidParameter("empty sweep".into()));
    }
    if let Some(bad) = a_list.iter().find(|a| !(**a < 0.0)) {
        return Err(Error::InvalidParameter(format!("shooting parameters must be negative, got {bad}")));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
    }
    let mut a_sorted = a_list.to_vec();
    a_sorted.sort_by(f64::total_cmp);
    a_sorted.dedup();
    let table = table_for(a_sorted[0], k, config)?;
    let mut rows: Vec<SweepRow> = a_sorted
        .par_iter()
        .map(|&a| {
            let p = integrate_scaled_with_table(a, config, &table)?;
            let e0 = e0_from_profile(&p)?;
            Ok(SweepRow {
                a,
                r0: p.r0.expect("crossing"),
                dpsi_r0: p.dpsi_at_r0.expect("crossing"),
                e0,
                scaled_mass: p.mass_accumulated.unwrap_or(f64::NAN),
                physical_mass: physical_mass(&p, c)?,
                admissible: true,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut threshold = None;
    if rows.len() >= 3 {
        let imin = (0..rows.len()).min_by(|&i, &j| rows[i].r0.total_cmp(&rows[j].r0)).expect("nonempty");
        if imin == rows.len() - 1 {
            rows.iter_mut().for_each(|r| r.admissible = false);
        } else if imin > 0 {
            let bracket = (rows[imin - 1].a, rows[imin + 1].a);
            let a_star = match find_threshold(k, bracket, config) {
                Ok(t) => t.a_star,
                Err(_) => rows[imin].a,
            };
            threshold = Some(a_star);
            rows.iter_mut().for_each(|r| r.admissible = r.a > a_star);
        }
    }

    let mut adm: Vec<&SweepRow> = rows.iter().filter(|r| r.admissible).collect();
    adm.sort_by(|x, y| x.e0.total_cmp(&y.e0));
    let violations = adm
        .windows(2)
        .filter(|w| !(w[1].physical_mass < w[0].physical_mass) || !(w[1].e0 > w[0].e0))
        .map(|w| (w[0].a, w[1].a))
        .collect();
    Ok(SweepResult { k, c, rows, threshold, violations })
}

/// Outcome of a single multiplier identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_error: f64,
    pub passed: bool,
}

/// Consistency of a physical profile with the minimizer identities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierReport {
    pub k: f64,
    pub e0: f64,
    pub tolerance: f64,
    /// Open interval `((k+4)/6 · I/M, I/M)`.
    pub e0_interval: (f64, f64),
    pub checks: Vec<MultiplierCheck>,
}

impl MultiplierReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&MultiplierCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&MultiplierCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

fn rel(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
}

/// Checks the multiplier formulas, the `E₀` interval and the exterior field law.
///
/// Check names: `e0_virial`, `c_formula`, `e0_interval`, `support_radius`,
/// `slope_at_support`, `exterior_law`.
pub fn multiplier_consistency(phys: &PhysicalProfile, tolerance: f64) -> MultiplierReport {
    let k = phys.k();
    let e0 = phys.e0();
    let c = phys.params.c;
    let (m, i, j) = (phys.mass, phys.i_estimate, phys.lq_norm);
    let x = 2.0 * phys.field_energy;
    let mut checks = Vec::new();
    let eq = |name: &str, lhs: f64, rhs: f64| {
        let e = rel(lhs, rhs);
        MultiplierCheck { name: name.into(), lhs, rhs, rel_error: e, passed: e <= tolerance }
    };

    checks.push(eq("e0_virial", e0, (i - (2.0 - k) / 6.0 * x) / m));
    checks.push(eq("c_formula", c, (k + 1.0) / (2.0 - k) * (i - e0 * m) / j.powf(1.0 + 1.0 / k)));
    let lo = (k + 4.0) / 6.0 * i / m;
    let hi = i / m;
    let outside = if e0 <= lo {
        (lo - e0) / e0
    } else if e0 >= hi {
        (e0 - hi) / e0
    } else {
        0.0
    };
    checks.push(MultiplierCheck {
        name: "e0_interval".into(),
        lhs: e0,
        rhs: 0.5 * (lo + hi),
        rel_error: outside,
        passed: e0 > lo && e0 < hi,
    });
    let ln_e0 = e0.ln();
    let q = (6.0 * e0 * m - (k + 4.0) * i) / (2.0 - k);
    checks.push(eq("support_radius", phys.support_radius, -q / (4.0 * PI * ln_e0)));
    checks.push(eq("slope_at_support", phys.dphi_at_support, 4.0 * PI * ln_e0 * ln_e0 / q));

    let rs = phys.support_radius;
    let v0 = rs * rs * phys.phi_at(rs).1;
    let worst =
        phys.r_nodes.iter().filter(|&&r| r >= rs).map(|&r| rel(r * r * phys.phi_at(r).1, v0)).fold(0.0, f64::max);
    checks.push(MultiplierCheck {
        name: "exterior_law".into(),
        lhs: v0,
        rhs: v0,
        rel_error: worst,
        passed: worst <= tolerance,
    });

    MultiplierReport { k, e0, tolerance, e0_interval: (lo, hi), checks }
}

/// Settings of the Green's-function fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GreensConfig {
    pub damping: f64,
    /// Iteration after which the relaxation factor adapts.
    pub accelerate_after: usize,
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for GreensConfig {
    fn default() -> Self {
        Self { damping: 0.5, accelerate_after: 10, tol: 1e-10, max_iterations: 10_000 }
    }
}

/// Field generated by a gridded distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreensSolution {
    pub r: Vec<f64>,
    pub psi: Vec<f64>,
    /// `ψ'` from the enclosed source, `r⁻²∫₀^r s² g ds`.
    pub dpsi: Vec<f64>,
    pub iterations: usize,
}

fn greens_map(d: &Distribution, wp: &[f64], p2: &[f64], psi: &[f64], out: &mut [f64], inner_out: &mut [f64]) {
    let nr = d.nr();
    let np = d.np();
    let mut g = vec![0.0; nr + 1];
    for i in 0..nr {
        let m2 = (2.0 * psi[i]).exp();
        let row = &d.f[i * np..(i + 1) * np];
        let mut s = 0.0;
        for j in 0..np {
            if row[j] != 0.0 {
                s += wp[j] * row[j] / (m2 + p2[j]).sqrt();
            }
        }
        g[i + 1] = m2 * s;
    }
    let mut rr = Vec::with_capacity(nr + 1);
    rr.push(0.0);
    rr.extend_from_slice(&d.r_grid);
    let y_in: Vec<f64> = rr.iter().zip(&g).map(|(r, g)| r * r * g).collect();
    let y_out: Vec<f64> = rr.iter().zip(&g).map(|(r, g)| r * g).collect();
    let inner = cumulative_trapezoid(&rr, &y_in);
    let cum_out = cumulative_trapezoid(&rr, &y_out);
    let total_out = cum_out[nr];
    for i in 0..nr {
        let r = rr[i + 1];
        out[i] = -inner[i + 1] / r - (total_out - cum_out[i + 1]);
        inner_out[i] = inner[i + 1];
    }
}

/// Solves `Δψ = e^{2ψ} ∫ f/√(e^{2ψ}+|p|²) dp` with `ψ → 0` at infinity.
///
/// Uses the radial Green's representation
/// `ψ(r) = −r⁻¹∫₀^r s²g ds − ∫_r^R s g ds` in a damped fixed-point iteration.
/// After `accelerate_after` iterations the relaxation factor adapts from the
/// last two residuals.
pub fn greens_solve(dist: &Distribution, cfg: &GreensConfig) -> Result<GreensSolution> {
    dist.validate()?;
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) || !(cfg.tol > 0.0) {
        return Err(Error::InvalidParameter("greens damping must be in (0, 1] and tol positive".into()));
    }
    if dist.boundary_mass() > 0.0 && dist.row(dist.nr() - 1).iter().any(|&v| v > 0.0) {
        log::warn!("distribution does not vanish at the outer radius");
    }
    let nr = dist.nr();
    let wp = ball_weights(&dist.p_grid)?;
    let p2: Vec<f64> = dist.p_grid.iter().map(|p| p * p).collect();
    let mut psi = vec![0.0; nr];
    let mut mapped = vec![0.0; nr];
    let mut inner = vec![0.0; nr];
    let mut prev_res: Option<Vec<f64>> = None;
    let mut omega = cfg.damping;

    for it in 1..=cfg.max_iterations {
        greens_map(dist, &wp, &p2, &psi, &mut mapped, &mut inner);
        let res: Vec<f64> = mapped.iter().zip(&psi).map(|(m, x)| m - x).collect();
        if it > cfg.accelerate_after {
            if let Some(pr) = &prev_res {
                let mut num = 0.0;
                let mut den = 0.0;
                for (r1, r0) in res.iter().zip(pr) {
                    let dr = r1 - r0;
                    num += r0 * dr;
                    den += dr * dr;
                }
                if den > 0.0 {
                    omega = (-omega * num / den).clamp(0.05, 1.0);
                }
            }
        }
        let mut change: f64 = 0.0;
        for (x, r) in psi.iter_mut().zip(&res) {
            let step = omega * r;
            *x += step;
            change = change.max(step.abs());
        }
        if !change.is_finite() {
            return Err(Error::NonFinite("greens iterate".into()));
        }
        prev_res = Some(res);
        if change < cfg.tol {
            greens_map(dist, &wp, &p2, &psi, &mut mapped, &mut inner);
            let dpsi = inner.iter().zip(&dist.r_grid).map(|(q, r)| q / (r * r)).collect();
            return Ok(GreensSolution { r: dist.r_grid.clone(), psi, dpsi, iterations: it });
        }
    }
    Err(Error::NotConverged { what: "greens fixed point".into(), iterations: cfg.max_iterations })
}

/// Convenience: integrate, scale and assemble in one call.
pub fn steady_state(k: f64, a: f64, c: f64, config: &SolverConfig) -> Result<PhysicalProfile> {
    let p = integrate_scaled(a, k, config)?;
    scale_to_physical(&p, c)
}
