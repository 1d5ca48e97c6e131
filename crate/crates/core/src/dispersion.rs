//! Conformal energy under free transport.
//!
//! With the field switched off, particles move on straight lines
//! `x(t) = x + p t/√(1+|p|²)`, and the conformal energy
//! `𝓔_C(t) = ∫∫ |x|² √(1+|p|²) f dp dx` is the exact quadratic
//! `c0 + c1 t + c2 t²` with
//!
//! ```text
//! c0 = ∫∫ |x|² √(1+|p|²) f,   c1 = 2 ∫∫ x·p f,   c2 = ∫∫ |p|²/√(1+|p|²) f.
//! ```
//!
//! Since `√(1+p²) − 1 ≤ p²/√(1+p²)`, the leading coefficient dominates
//! `H − M`, and `𝓔_C(t) ≥ (H − M) t²` for all large `t`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::Distribution;
use crate::io::{fmt_f64, write_csv_header};

/// Coefficients of `𝓔_C(t) = c0 + c1 t + c2 t²` together with `H` and `M` at zero field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalCoefficients {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub h: f64,
    pub m: f64,
}

impl ConformalCoefficients {
    pub fn conformal_energy(&self, t: f64) -> f64 {
        self.c0 + t * (self.c1 + t * self.c2)
    }

    /// `c2 − (h − m)`, nonnegative for every nonnegative `f`.
    pub fn slack(&self) -> f64 {
        self.c2 - (self.h - self.m)
    }

    /// `Q₀ = ½ c1`.
    pub fn q0(&self) -> f64 {
        0.5 * self.c1
    }

    /// Coefficients of the mirrored data `f(x, −p)`.
    pub fn reversed(&self) -> Self {
        Self { c1: -self.c1, ..*self }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("c0", self.c0), ("c1", self.c1), ("c2", self.c2), ("h", self.h), ("m", self.m)] {
            if !v.is_finite() {
                return Err(Error::NonIntegrable(format!("conformal coefficient {name}")));
            }
        }
        Ok(())
    }
}

/// Coefficients of an isotropic gridded distribution.
///
/// Isotropic data has `∫∫ x·p f = 0`; a correlated state can supply the
/// moment `∫∫ x·p f` directly. It must satisfy the Cauchy–Schwarz bound
/// `|∫∫ x·p f| ≤ √(c0 c2)`.
pub fn conformal_coefficients(dist: &Distribution, xp_moment: Option<f64>) -> Result<ConformalCoefficients> {
    dist.validate()?;
    let (wr, wp) = dist.weights()?;
    let r2: Vec<f64> = dist.r_grid.iter().map(|r| r * r).collect();
    let en: Vec<f64> = dist.p_grid.iter().map(|p| (1.0 + p * p).sqrt()).collect();
    let p2: Vec<f64> = dist.p_grid.iter().map(|p| p * p).collect();
    let c0 = dist.integrate_weighted(&wr, &wp, |i, j| r2[i] * en[j]);
    let c2 = dist.integrate_weighted(&wr, &wp, |_, j| p2[j] / en[j]);
    let h = dist.integrate_weighted(&wr, &wp, |_, j| en[j]);
    let m = dist.integrate_weighted(&wr, &wp, |_, _| 1.0);
    let xp = xp_moment.unwrap_or(0.0);
    let out = ConformalCoefficients { c0, c1: 2.0 * xp, c2, h, m };
    out.validate()?;
    if xp.abs() > (c0 * c2).sqrt() * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "x·p moment {xp} exceeds the Cauchy-Schwarz bound {}",
            (c0 * c2).sqrt()
        )));
    }
    Ok(out)
}

/// One weighted particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub x: [f64; 3],
    pub p: [f64; 3],
    pub w: f64,
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Weighted particle approximation of `f₀`, for data without radial symmetry.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseCloud {
    pub particles: Vec<Particle>,
}

impl PhaseCloud {
    pub fn new(particles: Vec<Particle>) -> Result<Self> {
        for (i, q) in particles.iter().enumerate() {
            if !(q.w >= 0.0) || q.x.iter().chain(&q.p).any(|v| !v.is_finite()) || !q.w.is_finite() {
                return Err(Error::InvalidParameter(format!("particle {i} is not a finite nonnegative sample")));
            }
        }
        Ok(Self { particles })
    }

    /// Particles at rest.
    pub fn cold(positions: &[[f64; 3]], weights: &[f64]) -> Result<Self> {
        if positions.len() != weights.len() {
            return Err(Error::Shape("positions and weights differ in length".into()));
        }
        Self::new(positions.iter().zip(weights).map(|(x, &w)| Particle { x: *x, p: [0.0; 3], w }).collect())
    }

    /// Shifts every position by `dx` and every momentum by `dp`.
    pub fn boosted(&self, dx: [f64; 3], dp: [f64; 3]) -> Self {
        let particles = self
            .particles
            .iter()
            .map(|q| Particle {
                x: [q.x[0] + dx[0], q.x[1] + dx[1], q.x[2] + dx[2]],
                p: [q.p[0] + dp[0], q.p[1] + dp[1], q.p[2] + dp[2]],
                w: q.w,
            })
            .collect();
        Self { particles }
    }

    /// State after free transport for time `t`.
    pub fn transported(&self, t: f64) -> Self {
        let particles = self
            .particles
            .iter()
            .map(|q| {
                let e = (1.0 + dot(&q.p, &q.p)).sqrt();
                let v = [q.p[0] / e, q.p[1] / e, q.p[2] / e];
                Particle { x: [q.x[0] + v[0] * t, q.x[1] + v[1] * t, q.x[2] + v[2] * t], p: q.p, w: q.w }
            })
            .collect();
        Self { particles }
    }

    /// `∫∫ |x|² √(1+|p|²) f` evaluated directly on the particles.
    pub fn conformal_energy(&self) -> f64 {
        self.particles.iter().map(|q| q.w * dot(&q.x, &q.x) * (1.0 + dot(&q.p, &q.p)).sqrt()).sum()
    }

    pub fn coefficients(&self) -> ConformalCoefficients {
        let mut c = ConformalCoefficients { c0: 0.0, c1: 0.0, c2: 0.0, h: 0.0, m: 0.0 };
        for q in &self.particles {
            let p2 = dot(&q.p, &q.p);
            let e = (1.0 + p2).sqrt();
            c.c0 += q.w * dot(&q.x, &q.x) * e;
            c.c1 += 2.0 * q.w * dot(&q.x, &q.p);
            c.c2 += q.w * p2 / e;
            c.h += q.w * e;
            c.m += q.w;
        }
        c
    }
}

/// One time sample of [`check_dispersion`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionRow {
    pub t: f64,
    pub ec: f64,
    /// `(h − m) t²` when `h > m`.
    pub bound_quadratic: Option<f64>,
    /// `c1 t` when `h = m` and `c1 > 0`.
    pub bound_linear: Option<f64>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionReport {
    pub coefficients: ConformalCoefficients,
    pub rows: Vec<DispersionRow>,
    /// Time after which the active bound holds for every later `t`.
    pub t0_analytic: f64,
    /// First grid time from which every sampled row holds.
    pub t0_empirical: Option<f64>,
    /// Rows at `t ≥ t0_analytic` where the bound fails.
    pub violations: Vec<f64>,
    /// `c2 ≥ h − m`.
    pub slack_ok: bool,
}

impl DispersionReport {
    pub fn passed(&self) -> bool {
        self.slack_ok && self.violations.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W, header: Option<&str>) -> std::io::Result<()> {
        write_csv_header(&mut w, header, "t,ec,bound_quadratic,bound_linear,ok")?;
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_f64(r.t),
                fmt_f64(r.ec),
                opt(r.bound_quadratic),
                opt(r.bound_linear),
                r.ok
            )?;
        }
        Ok(())
    }
}

fn largest_root(a: f64, b: f64, c: f64) -> f64 {
    // Largest t with a t² + b t + c = 0, or 0 when the quadratic stays nonnegative on t > 0.
    if a > 0.0 {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return 0.0;
        }
        let t = (-b + disc.sqrt()) / (2.0 * a);
        t.max(0.0)
    } else if b > 0.0 {
        (-c / b).max(0.0)
    } else if b == 0.0 && c >= 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Evaluates `𝓔_C` on `t_grid` and compares it with the applicable lower bound.
///
/// When `h > m` the bound is `(h − m) t²`; when `h = m` and `c1 > 0` it is
/// `c1 t`; otherwise no bound applies and every row passes.
pub fn check_dispersion(coefficients: &ConformalCoefficients, t_grid: &[f64]) -> DispersionReport {
    let c = *coefficients;
    let scale = c.c0.abs() + c.c1.abs() + c.c2.abs() + c.h.abs();
    let excess = c.h - c.m;
    let quadratic = excess > 1e-15 * c.m.abs().max(f64::MIN_POSITIVE);
    let linear = !quadratic && c.c1 > 0.0;
    let slack = c.slack();
    let slack_ok = slack >= -1e-13 * c.h.abs().max(f64::MIN_POSITIVE);

    let t0_analytic = if quadratic {
        largest_root(slack, c.c1, c.c0)
    } else if linear {
        largest_root(c.c2, 0.0, c.c0)
    } else {
        0.0
    };

    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let ec = c.conformal_energy(t);
        let bq = quadratic.then_some(excess * t * t);
        let bl = linear.then_some(c.c1 * t);
        let bound = bq.or(bl).unwrap_or(f64::NEG_INFINITY);
        let tol = 1e-12 * scale * (1.0 + t * t);
        rows.push(DispersionRow { t, ec, bound_quadratic: bq, bound_linear: bl, ok: ec >= bound - tol });
    }
    let mut t0_empirical = None;
    for r in rows.iter().rev() {
        if !r.ok {
            break;
        }
        t0_empirical = Some(r.t);
    }
    let violations = rows.iter().filter(|r| !r.ok && r.t >= t0_analytic * (1.0 + 1e-9)).map(|r| r.t).collect();
    DispersionReport { coefficients: c, rows, t0_analytic, t0_empirical, violations, slack_ok }
}
