//! Adaptive Gauss–Kronrod integration and fixed-grid Simpson weights.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_119, 0.417_959_183_673_469_4];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Target absolute error of the whole integral.
    pub abs_tol: f64,
    /// Target error relative to the magnitude of the integral.
    pub rel_tol: f64,
    /// Maximum number of bisections applied to any subinterval.
    pub max_depth: u32,
    /// Hard cap on the number of live subintervals.
    pub max_intervals: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-14, max_depth: 48, max_intervals: 1_000_000 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !self.abs_tol.is_finite() {
            return Err(Error::InvalidParameter(format!("quadrature.abs_tol must be positive, got {}", self.abs_tol)));
        }
        if !(self.rel_tol >= 0.0) || !self.rel_tol.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "quadrature.rel_tol must be nonnegative, got {}",
                self.rel_tol
            )));
        }
        if self.max_intervals < 1 {
            return Err(Error::InvalidParameter("quadrature.max_intervals must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error).then_with(|| other.a.total_cmp(&self.a))
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    let mut abs = WGK[7] * fc.abs();
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        k += WGK[j] * (f1 + f2);
        abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    let value = k * h;
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("integrand on [{a:e}, {b:e}]")));
    }
    Ok((value, ((k - g) * h).abs(), abs * h.abs()))
}

/// Globally adaptive 7/15-point Gauss–Kronrod quadrature of `f` over `[a, b]`.
///
/// The interval with the largest error estimate is bisected until the summed
/// estimate drops below `max(cfg.abs_tol, cfg.rel_tol·|I|)`. Intervals whose estimate is already at
/// the level of rounding, or which reached `cfg.max_depth`, are frozen.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("integration limits".into()));
    }
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0, intervals: 0 });
    }
    let roundoff = |err: f64, abs: f64| err <= 64.0 * f64::EPSILON * abs;

    let (value, error, abs) = kronrod(&mut f, a, b)?;
    let mut live = BinaryHeap::new();
    let mut frozen: Vec<Segment> = Vec::new();
    let first = Segment { a, b, value, error, depth: 0 };
    if roundoff(error, abs) {
        frozen.push(first);
    } else {
        live.push(first);
    }
    let mut total_err = error;
    let mut total_val = value;
    let target = |v: f64| cfg.abs_tol.max(cfg.rel_tol * v.abs());

    while total_err > target(total_val) {
        let Some(seg) = live.pop() else { break };
        if seg.depth >= cfg.max_depth {
            frozen.push(seg);
            continue;
        }
        if live.len() + frozen.len() + 2 > cfg.max_intervals {
            live.push(seg);
            let err = live.iter().chain(frozen.iter()).map(|s| s.error).sum();
            return Err(Error::QuadratureLimit { intervals: cfg.max_intervals, error: err });
        }
        let mid = 0.5 * (seg.a + seg.b);
        total_err -= seg.error;
        total_val -= seg.value;
        for (lo, hi) in [(seg.a, mid), (mid, seg.b)] {
            let (v, e, s) = kronrod(&mut f, lo, hi)?;
            let child = Segment { a: lo, b: hi, value: v, error: e, depth: seg.depth + 1 };
            total_err += e;
            total_val += v;
            if roundoff(e, s) {
                frozen.push(child);
            } else {
                live.push(child);
            }
        }
    }

    let mut all: Vec<Segment> = live.into_vec();
    all.extend(frozen);
    all.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = all.iter().map(|s| s.value).sum();
    let error = all.iter().map(|s| s.error).sum();
    Ok(Estimate { value, error, intervals: all.len() })
}

/// Fixed 15-point Kronrod rule on `[a, b]`, without adaptation.
pub fn kronrod15<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> Result<f64> {
    kronrod(&mut f, a, b).map(|(v, _, _)| v)
}

pub(crate) fn check_increasing(x: &[f64], name: &str) -> Result<()> {
    if x.is_empty() {
        return Err(Error::InvalidGrid(format!("{name} is empty")));
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid(format!("{name} contains {bad}")));
    }
    if x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(format!("{name} is not strictly increasing")));
    }
    Ok(())
}

/// Composite Simpson weights for samples on a possibly nonuniform grid.
///
/// Pairs of intervals use the exact quadratic rule; with an odd number of
/// intervals the last one is integrated with the quadratic through the last
/// three nodes. Two nodes fall back to the trapezoid rule.
pub fn simpson_weights(x: &[f64]) -> Result<Vec<f64>> {
    check_increasing(x, "grid")?;
    let n = x.len();
    let mut w = vec![0.0; n];
    if n == 1 {
        return Ok(w);
    }
    if n == 2 {
        let h = x[1] - x[0];
        return Ok(vec![0.5 * h, 0.5 * h]);
    }
    let intervals = n - 1;
    let paired = if intervals % 2 == 0 { intervals } else { intervals - 1 };
    let mut i = 0;
    while i < paired {
        let h0 = x[i + 1] - x[i];
        let h1 = x[i + 2] - x[i + 1];
        let s = (h0 + h1) / 6.0;
        w[i] += s * (2.0 - h1 / h0);
        w[i + 1] += s * (h0 + h1) * (h0 + h1) / (h0 * h1);
        w[i + 2] += s * (2.0 - h0 / h1);
        i += 2;
    }
    if paired < intervals {
        let h1 = x[n - 1] - x[n - 2];
        let h0 = x[n - 2] - x[n - 3];
        w[n - 1] += (2.0 * h1 * h1 + 3.0 * h0 * h1) / (6.0 * (h0 + h1));
        w[n - 2] += (h1 * h1 + 3.0 * h1 * h0) / (6.0 * h0);
        w[n - 3] -= h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
    }
    Ok(w)
}

/// Weights for `∫ 4π x^power g(x) dx` over `[0, x_last]`.
///
/// When the grid starts above zero the origin is added as an extra node
/// where the integrand is taken to vanish, which is exact for `power > 0`.
pub fn radial_weights(x: &[f64], power: i32) -> Result<Vec<f64>> {
    check_increasing(x, "grid")?;
    if x[0] < 0.0 {
        return Err(Error::InvalidGrid("radial grid has negative nodes".into()));
    }
    let w = if x[0] > 0.0 {
        let mut ext = Vec::with_capacity(x.len() + 1);
        ext.push(0.0);
        ext.extend_from_slice(x);
        simpson_weights(&ext)?.split_off(1)
    } else {
        simpson_weights(x)?
    };
    Ok(w.iter().zip(x).map(|(wi, xi)| 4.0 * PI * wi * xi.powi(power)).collect())
}

/// Shorthand for `radial_weights(x, 2)`, the `4π x² dx` measure.
pub fn ball_weights(x: &[f64]) -> Result<Vec<f64>> {
    radial_weights(x, 2)
}

/// Running trapezoid integral of `y` over `x`, starting from zero.
pub fn cumulative_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..x.len() {
        acc += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kronrod_polynomial_exact() {
        let v = kronrod15(|x| x.powi(20), 0.0, 1.0).unwrap();
        assert_relative_eq!(v, 1.0 / 21.0, max_relative = 1e-14);
    }

    #[test]
    fn adaptive_endpoint_singularity() {
        let cfg = QuadratureConfig::default();
        let est = integrate(|x| x.sqrt(), 0.0, 1.0, &cfg).unwrap();
        assert!((est.value - 2.0 / 3.0).abs() < 1e-12);
        let est = integrate(|x: f64| (1.0 - x).powf(0.25), 0.0, 1.0, &cfg).unwrap();
        assert!((est.value - 0.8).abs() < 1e-12);
    }

    #[test]
    fn reversed_and_empty_ranges() {
        let cfg = QuadratureConfig::default();
        assert_eq!(integrate(|x| x, 2.0, 2.0, &cfg).unwrap().value, 0.0);
        let est = integrate(|x| x, 1.0, 0.0, &cfg).unwrap();
        assert_relative_eq!(est.value, -0.5, max_relative = 1e-14);
    }

    #[test]
    fn interval_cap_is_reported() {
        let cfg = QuadratureConfig { abs_tol: 1e-15, rel_tol: 0.0, max_depth: 60, max_intervals: 4 };
        let err = integrate(|x: f64| (1.0 / x).sin() * x.sqrt(), 1e-6, 1.0, &cfg).unwrap_err();
        assert!(matches!(err, Error::QuadratureLimit { .. }));
    }

    #[test]
    fn non_finite_integrand() {
        let cfg = QuadratureConfig::default();
        assert!(integrate(|_| f64::NAN, 0.0, 1.0, &cfg).is_err());
    }

    #[test]
    fn simpson_exact_on_quadratics_nonuniform() {
        for n in [3usize, 4, 5, 8, 11] {
            let x: Vec<f64> = (0..n).map(|i| (i as f64).powf(1.3) + 0.1 * i as f64).collect();
            let w = simpson_weights(&x).unwrap();
            let q: f64 = w.iter().zip(&x).map(|(w, x)| w * (3.0 * x * x - x + 2.0)).sum();
            let (a, b) = (x[0], x[n - 1]);
            let exact = (b.powi(3) - a.powi(3)) - 0.5 * (b * b - a * a) + 2.0 * (b - a);
            assert_relative_eq!(q, exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn ball_weights_volume() {
        let x: Vec<f64> = (1..=40).map(|i| i as f64 / 40.0).collect();
        let w = ball_weights(&x).unwrap();
        let v: f64 = w.iter().sum();
        assert_relative_eq!(v, 4.0 * PI / 3.0, max_relative = 1e-12);
        let p: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
        let w = ball_weights(&p).unwrap();
        assert_relative_eq!(w.iter().sum::<f64>(), 4.0 * PI / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(simpson_weights(&[]).is_err());
        assert!(simpson_weights(&[0.0, 0.0]).is_err());
        assert!(simpson_weights(&[1.0, f64::NAN]).is_err());
    }
}
