//! Momentum-space integrals of the polytrope ansatz.
//!
//! All integrals over `|p|` are rewritten on `t ∈ [0, 1]` with `p = p_max·t`
//! and the factor `E₀ − E` expressed as `p_max²(1 − t²)/(E₀ + E)`, which keeps
//! the integrand free of cancellation near the cutoff. A further substitution
//! `t = 1 − s²` smooths the `(1 − t)^k` endpoint.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::Distribution;
use crate::quadrature::{integrate, radial_weights, QuadratureConfig};

/// Constants `(k, E₀, c)` of the isotropic polytrope `f = ((E₀ − E)/c)₊^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolytropeParams {
    pub k: f64,
    pub e0: f64,
    pub c: f64,
}

impl PolytropeParams {
    pub fn new(k: f64, e0: f64, c: f64) -> Result<Self> {
        let p = Self { k, e0, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k < 2.0) {
            return Err(Error::InvalidParameter(format!("k must lie in (0, 2), got {}", self.k)));
        }
        if !(self.e0 > 0.0 && self.e0 < 1.0) {
            return Err(Error::InvalidParameter(format!("e0 must lie in (0, 1), got {}", self.e0)));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidParameter(format!("c must be positive, got {}", self.c)));
        }
        Ok(())
    }

    /// Conjugate exponent `q = 1 + 1/k` of the constrained `L^q` norm.
    pub fn q(&self) -> f64 {
        1.0 + 1.0 / self.k
    }

    /// Distribution value at particle energy `e`.
    pub fn f_of_energy(&self, e: f64) -> f64 {
        if e >= self.e0 {
            0.0
        } else {
            ((self.e0 - e) / self.c).powf(self.k)
        }
    }
}

pub(crate) fn check_k(k: f64) -> Result<()> {
    if k > 0.0 && k <= 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("k must lie in (0, 2], got {k}")))
    }
}

/// `∫₀¹ h(t) dt` after the substitution `t = 1 − s²`.
fn smoothed<F: Fn(f64) -> f64>(h: F, cfg: &QuadratureConfig) -> Result<f64> {
    let g = |s: f64| {
        let t = 1.0 - s * s;
        2.0 * s * h(t)
    };
    Ok(integrate(g, 0.0, 1.0, cfg)?.value)
}

/// Half-width `L = √(1 − e^{2ψ})` and `m² = e^{2ψ}` for `ψ < 0`.
fn well(psi: f64) -> (f64, f64) {
    let l2 = -(2.0 * psi).exp_m1();
    (l2.sqrt(), (2.0 * psi).exp())
}

/// `μ̃(ψ)/L^{2k+3}`, a smooth function of `ψ` up to and including `ψ = 0`.
pub fn mu_reduced(psi: f64, k: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let (l, m2) = well(psi.min(0.0));
    let inner = smoothed(
        |t| {
            let e = (m2 + l * l * t * t).sqrt();
            ((1.0 - t * t) / (1.0 + e)).powf(k + 1.0)
        },
        cfg,
    )?;
    Ok(4.0 * PI / (k + 1.0) * inner)
}

/// Scaled density `ρ̃(ψ)/L^{2k+3}` where `ρ̃ = 4π∫p²(1 − √(e^{2ψ}+p²))₊^k dp`.
pub fn rho_reduced(psi: f64, k: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let (l, m2) = well(psi.min(0.0));
    let inner = smoothed(
        |t| {
            let e = (m2 + l * l * t * t).sqrt();
            t * t * ((1.0 - t * t) / (1.0 + e)).powf(k)
        },
        cfg,
    )?;
    Ok(4.0 * PI * inner)
}

/// `L^{2k+3}` for the well depth `ψ`, zero when `ψ ≥ 0`.
pub fn well_factor(psi: f64, k: f64) -> f64 {
    if psi >= 0.0 {
        0.0
    } else {
        let l2 = -(2.0 * psi).exp_m1();
        l2.powf(k + 1.5)
    }
}

/// Scaled source `μ̃(ψ) = (4π/(k+1)) ∫₀^{√(1−e^{2ψ})} (1 − √(e^{2ψ}+ξ²))^{k+1} dξ`.
///
/// ```
/// let mu = nvpoly::momentum_integrals::mu_scaled(-0.5, 1.0).unwrap();
/// assert!((mu - 0.382316229405935).abs() < 1e-12);
/// ```
pub fn mu_scaled(psi: f64, k: f64) -> Result<f64> {
    mu_scaled_with(psi, k, &QuadratureConfig::default())
}

/// [`mu_scaled`] with explicit quadrature settings.
pub fn mu_scaled_with(psi: f64, k: f64, cfg: &QuadratureConfig) -> Result<f64> {
    check_k(k)?;
    if !psi.is_finite() {
        return Err(Error::NonFinite("psi".into()));
    }
    if psi >= 0.0 {
        return Ok(0.0);
    }
    Ok(well_factor(psi, k) * mu_reduced(psi, k, cfg)?)
}

/// Scaled mass density `ρ̃(ψ) = 4π∫p²(1 − √(e^{2ψ}+p²))₊^k dp`.
pub fn rho_scaled_with(psi: f64, k: f64, cfg: &QuadratureConfig) -> Result<f64> {
    check_k(k)?;
    if !psi.is_finite() {
        return Err(Error::NonFinite("psi".into()));
    }
    if psi >= 0.0 {
        return Ok(0.0);
    }
    Ok(well_factor(psi, k) * rho_reduced(psi, k, cfg)?)
}

/// Which antiderivative [`mu_closed_k1_variant`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClosedForm {
    /// `(2π/3)[L(1 + 2e^{2ψ}) − 3e^{2ψ} ln((1+L)/e^ψ)]`, equal to the integral.
    Corrected,
    /// The variant with `(1 − 2e^{2ψ})`, which is not the integral and turns
    /// negative for moderate wells. Kept for comparison only.
    AsPrinted,
}

/// Closed form of `μ̃(ψ)` for `k = 1`.
///
/// Small wells use the series `4π Σ_{j≥2} L^{2j+1}/(4j²−1)`, which avoids the
/// cancellation in the logarithmic form.
pub fn mu_closed_k1(psi: f64) -> f64 {
    mu_closed_k1_variant(psi, ClosedForm::Corrected)
}

/// Closed form of `μ̃(ψ)` at `k = 1` in the requested variant.
pub fn mu_closed_k1_variant(psi: f64, form: ClosedForm) -> f64 {
    if psi >= 0.0 {
        return 0.0;
    }
    if psi == f64::NEG_INFINITY {
        return match form {
            ClosedForm::Corrected | ClosedForm::AsPrinted => 2.0 * PI / 3.0,
        };
    }
    let (l, m2) = well(psi);
    let log_term = (l.ln_1p() - psi) * m2;
    match form {
        ClosedForm::AsPrinted => 2.0 * PI / 3.0 * (l * (1.0 - 2.0 * m2) - 3.0 * log_term),
        ClosedForm::Corrected if l < 0.5 => {
            let l2 = l * l;
            let mut term = l2 * l2 * l;
            let mut sum = 0.0;
            for j in 2..200 {
                let jf = j as f64;
                let add = term / (4.0 * jf * jf - 1.0);
                sum += add;
                if add < 1e-18 * sum {
                    break;
                }
                term *= l2;
            }
            4.0 * PI * sum
        }
        ClosedForm::Corrected => 2.0 * PI / 3.0 * (l * (1.0 + 2.0 * m2) - 3.0 * log_term),
    }
}

/// Momentum weights available to [`polytrope_moment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    /// `∫ f dp`
    Density,
    /// `∫ E f dp`
    Energy,
    /// `∫ f / E dp`
    InverseEnergy,
    /// `∫ |p|²/E f dp`
    Pressure,
    /// `∫ f^q dp`
    Power(f64),
}

/// Momentum integral `∫ w(p, E) f d³p` of the polytrope at potential `phi`,
/// with `E = √(e^{2φ} + |p|²)`.
pub fn polytrope_moment(phi: f64, params: &PolytropeParams, moment: Moment, cfg: &QuadratureConfig) -> Result<f64> {
    if phi.is_nan() {
        return Err(Error::NonFinite("phi".into()));
    }
    let m = phi.exp();
    if m >= params.e0 {
        return Ok(0.0);
    }
    let m2 = m * m;
    let e0 = params.e0;
    let pmax2 = (e0 - m) * (e0 + m);
    let pmax = pmax2.sqrt();
    let power = match moment {
        Moment::Power(q) => params.k * q,
        _ => params.k,
    };
    let scale = match moment {
        Moment::Power(q) => params.c.powf(-params.k * q),
        _ => params.c.powf(-params.k),
    };
    let inner = smoothed(
        |t| {
            let p2 = pmax2 * t * t;
            let e = (m2 + p2).sqrt();
            let gap = pmax2 * (1.0 - t * t) / (e0 + e);
            let w = match moment {
                Moment::Density | Moment::Power(_) => 1.0,
                Moment::Energy => e,
                Moment::InverseEnergy => 1.0 / e,
                Moment::Pressure => p2 / e,
            };
            t * t * w * gap.powf(power)
        },
        cfg,
    )?;
    Ok(4.0 * PI * pmax2 * pmax * scale * inner)
}

/// Momentum average `∫ f / E d³p` of the polytrope at potential `phi`.
pub fn momentum_average(phi: f64, params: &PolytropeParams) -> Result<f64> {
    params.validate()?;
    polytrope_moment(phi, params, Moment::InverseEnergy, &QuadratureConfig::default())
}

/// Right-hand side `e^{2φ} ∫ f / √(e^{2φ}+|p|²) d³p` of the field equation.
pub fn source_physical(phi: f64, params: &PolytropeParams) -> Result<f64> {
    source_physical_with(phi, params, &QuadratureConfig::default())
}

/// [`source_physical`] with explicit quadrature settings.
pub fn source_physical_with(phi: f64, params: &PolytropeParams, cfg: &QuadratureConfig) -> Result<f64> {
    params.validate()?;
    let avg = polytrope_moment(phi, params, Moment::InverseEnergy, cfg)?;
    Ok((2.0 * phi).exp() * avg)
}

/// Radial profiles `ρ_f = ∫ f dp` and `μ_f = ∫ f/|p| dp` of a gridded distribution.
pub fn rho_moments(dist: &Distribution) -> Result<(Vec<f64>, Vec<f64>)> {
    dist.validate()?;
    let w2 = radial_weights(&dist.p_grid, 2)?;
    let w1 = radial_weights(&dist.p_grid, 1)?;
    let np = dist.p_grid.len();
    let mut rho = Vec::with_capacity(dist.r_grid.len());
    let mut mu = Vec::with_capacity(dist.r_grid.len());
    for (i, row) in dist.f.chunks(np).enumerate() {
        let r: f64 = row.iter().zip(&w2).map(|(f, w)| f * w).sum();
        let u: f64 = row.iter().zip(&w1).map(|(f, w)| f * w).sum();
        if !u.is_finite() || !r.is_finite() {
            return Err(Error::NonIntegrable(format!("momentum moments at radial node {i} are not finite")));
        }
        rho.push(r);
        mu.push(u);
    }
    Ok((rho, mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_well() {
        for k in [0.5, 1.0, 2.0] {
            assert_eq!(mu_scaled(0.0, k).unwrap(), 0.0);
            assert_eq!(mu_scaled(0.3, k).unwrap(), 0.0);
        }
        assert_eq!(mu_closed_k1(0.0), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(mu_scaled(f64::NAN, 1.0).is_err());
        assert!(mu_scaled(-1.0, 0.0).is_err());
        assert!(mu_scaled(-1.0, 2.5).is_err());
        assert!(PolytropeParams::new(2.0, 0.5, 1.0).is_err());
        assert!(PolytropeParams::new(1.0, 1.0, 1.0).is_err());
        assert!(PolytropeParams::new(1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn deep_well_limit() {
        for k in [0.5, 1.0, 1.5, 2.0] {
            let lim = 4.0 * PI / ((k + 1.0) * (k + 2.0));
            assert_relative_eq!(mu_scaled(-30.0, k).unwrap(), lim, max_relative = 1e-10);
        }
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for i in 0..=400 {
            let psi = -20.0 * i as f64 / 400.0 - 1e-9;
            let q = mu_scaled(psi, 1.0).unwrap();
            let c = mu_closed_k1(psi);
            assert_relative_eq!(c, q, max_relative = 1e-10);
        }
    }

    #[test]
    fn printed_variant_goes_negative() {
        assert!(mu_closed_k1_variant(-0.5, ClosedForm::AsPrinted) < 0.0);
        assert!(mu_closed_k1_variant(-0.5, ClosedForm::Corrected) > 0.0);
    }

    #[test]
    fn physical_source_vanishes_outside_well() {
        let p = PolytropeParams::new(1.0, 0.7, 1.0).unwrap();
        assert_eq!(source_physical(0.7f64.ln(), &p).unwrap(), 0.0);
        assert_eq!(source_physical(0.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn physical_matches_scaled() {
        for &(k, e0, c) in &[(1.0, 0.7, 1.0), (0.5, 0.4, 2.0), (1.5, 0.9, 0.3)] {
            let p = PolytropeParams::new(k, e0, c).unwrap();
            for phi in [-3.0, -1.2, e0.ln() - 0.01] {
                let psi = phi - e0.ln();
                let avg = momentum_average(phi, &p).unwrap();
                let want = e0.powf(k + 2.0) * c.powf(-k) * mu_scaled(psi, k).unwrap();
                assert_relative_eq!(avg, want, max_relative = 1e-10);
                let src = source_physical(phi, &p).unwrap();
                let want = c.powf(-k) * e0.powf(k + 4.0) * (2.0 * psi).exp() * mu_scaled(psi, k).unwrap();
                assert_relative_eq!(src, want, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn deep_potential_average_limit() {
        let e0: f64 = 0.6;
        let p = PolytropeParams::new(1.0, e0, 1.0).unwrap();
        let avg = momentum_average(-40.0, &p).unwrap();
        assert_relative_eq!(avg, 4.0 * PI * e0.powi(3) / 6.0, max_relative = 1e-12);
    }

    #[test]
    fn casimir_identity() {
        // ∫ p²/E f = 3c/(k+1) ∫ f^{1+1/k} pointwise in x
        let p = PolytropeParams::new(0.7, 0.8, 1.3).unwrap();
        let cfg = QuadratureConfig::default();
        let lhs = polytrope_moment(-0.9, &p, Moment::Pressure, &cfg).unwrap();
        let rhs = 3.0 * p.c / (p.k + 1.0) * polytrope_moment(-0.9, &p, Moment::Power(p.q()), &cfg).unwrap();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-11);
    }
}
