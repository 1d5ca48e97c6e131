//! Dormand–Prince 5(4) integrator with continuous output and terminal events.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Step-control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

/// One accepted step together with its quartic interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    coeffs: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Evaluates the continuous extension at `t` (meant for `t` inside the step).
    pub fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let c = &self.coeffs;
        std::array::from_fn(|i| c[0][i] + th * (c[1][i] + th1 * (c[2][i] + th * (c[3][i] + th1 * c[4][i]))))
    }
}

/// Output of [`integrate`].
#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    pub steps: Vec<DenseStep<N>>,
    pub t: Vec<f64>,
    pub y: Vec<[f64; N]>,
    /// Location and state of the terminal event, if one fired.
    pub event: Option<(f64, [f64; N])>,
}

impl<const N: usize> Trajectory<N> {
    /// Dense evaluation anywhere inside the integrated range.
    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        let first = self.steps.first()?;
        let last = self.steps.last()?;
        if t < first.t0 || t > last.t1() {
            return None;
        }
        let idx = self.steps.partition_point(|s| s.t1() < t).min(self.steps.len() - 1);
        Some(self.steps[idx].eval(t))
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

struct Stages<const N: usize> {
    y1: [f64; N],
    k: [[f64; N]; 7],
}

fn stages<const N: usize, F: FnMut(f64, &[f64; N]) -> [f64; N]>(
    rhs: &mut F,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
) -> Stages<N> {
    let k2 = rhs(t + C2 * h, &axpy(y, h, &[(A21, k1)]));
    let k3 = rhs(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = rhs(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = rhs(t + C5 * h, &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = rhs(t + h, &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y1 = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = rhs(t + h, &y1);
    Stages { y1, k: [*k1, k2, k3, k4, k5, k6, k7] }
}

/// A single fifth-order step of size `h`, without error control.
pub fn single_step<const N: usize, F: FnMut(f64, &[f64; N]) -> [f64; N]>(
    mut rhs: F,
    t: f64,
    y: &[f64; N],
    h: f64,
) -> [f64; N] {
    let k1 = rhs(t, y);
    stages(&mut rhs, t, y, &k1, h).y1
}

fn error_norm<const N: usize>(y0: &[f64; N], s: &Stages<N>, h: f64, ctl: &StepControl) -> f64 {
    let k = &s.k;
    let mut acc = 0.0;
    for i in 0..N {
        let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
        let sc = ctl.abs_tol + ctl.rel_tol * y0[i].abs().max(s.y1[i].abs());
        acc += (e / sc).powi(2);
    }
    (acc / N as f64).sqrt()
}

fn dense_coeffs<const N: usize>(y0: &[f64; N], s: &Stages<N>, h: f64) -> [[f64; N]; 5] {
    let k = &s.k;
    let mut c = [[0.0; N]; 5];
    for i in 0..N {
        let ydiff = s.y1[i] - y0[i];
        let bspl = h * k[0][i] - ydiff;
        c[0][i] = y0[i];
        c[1][i] = ydiff;
        c[2][i] = bspl;
        c[3][i] = ydiff - h * k[6][i] - bspl;
        c[4][i] = h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
    }
    c
}

fn initial_step<const N: usize, F: FnMut(f64, &[f64; N]) -> [f64; N]>(
    rhs: &mut F,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    ctl: &StepControl,
) -> f64 {
    let norm = |v: &[f64; N]| {
        let s: f64 = (0..N).map(|i| (v[i] / (ctl.abs_tol + ctl.rel_tol * y0[i].abs())).powi(2)).sum();
        (s / N as f64).sqrt()
    };
    let d0 = norm(y0);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = axpy(y0, h0, &[(1.0, f0)]);
    let f1 = rhs(t0 + h0, &y1);
    let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1)
}

fn locate_event<const N: usize, G: FnMut(f64, &[f64; N]) -> f64>(
    step: &DenseStep<N>,
    g: &mut G,
    mut ga: f64,
    mut gb: f64,
) -> f64 {
    let (mut a, mut b) = (step.t0, step.t1());
    let tol = 1e-14 * b.abs().max(1.0);
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let mut t = (a * gb - b * ga) / (gb - ga);
        if !(t > a && t < b) {
            t = 0.5 * (a + b);
        }
        let gt = g(t, &step.eval(t));
        if gt == 0.0 {
            return t;
        }
        if (gt > 0.0) == (gb > 0.0) {
            b = t;
            gb = gt;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = t;
            ga = gt;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
    }
    if ga.abs() < gb.abs() {
        a
    } else {
        b
    }
}

/// Integrates `y' = rhs(t, y)` from `t0` towards `t_end > t0`.
///
/// When `event` is given, integration stops at the first upward zero of
/// `event(t, y)`, located on the continuous extension.
pub fn integrate<const N: usize, F, G>(
    mut rhs: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    ctl: &StepControl,
    mut event: Option<G>,
) -> Result<Trajectory<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    G: FnMut(f64, &[f64; N]) -> f64,
{
    if !(t_end > t0) {
        return Err(Error::InvalidParameter(format!("empty integration range [{t0}, {t_end}]")));
    }
    let mut traj = Trajectory { steps: Vec::new(), t: vec![t0], y: vec![y0], event: None };
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y);
    let mut h = initial_step(&mut rhs, t0, &y0, &k1, ctl).min(t_end - t0);
    let mut g_prev = event.as_mut().map(|g| g(t, &y));
    let mut rejected = false;

    for _ in 0..ctl.max_steps {
        if t + h > t_end {
            h = t_end - t;
        }
        if h <= 4.0 * f64::EPSILON * t.abs().max(1e-300) {
            return Err(Error::StepSizeUnderflow { r: t });
        }
        let s = stages(&mut rhs, t, &y, &k1, h);
        let err = error_norm(&y, &s, h, ctl);
        if !err.is_finite() {
            h *= 0.2;
            rejected = true;
            continue;
        }
        if err > 1.0 {
            let fac = (0.9 * err.powf(-0.2)).max(0.2);
            h *= if rejected { fac.min(0.5) } else { fac };
            rejected = true;
            continue;
        }
        let step = DenseStep { t0: t, h, coeffs: dense_coeffs(&y, &s, h) };
        let t_new = t + h;
        if let (Some(g), Some(gp)) = (event.as_mut(), g_prev) {
            let gn = g(t_new, &s.y1);
            if gp < 0.0 && gn >= 0.0 {
                let te = locate_event(&step, g, gp, gn);
                let ye = step.eval(te);
                traj.steps.push(step);
                traj.t.push(t_new);
                traj.y.push(s.y1);
                traj.event = Some((te, ye));
                return Ok(traj);
            }
            g_prev = Some(gn);
        }
        traj.steps.push(step);
        traj.t.push(t_new);
        traj.y.push(s.y1);
        t = t_new;
        y = s.y1;
        k1 = s.k[6];
        if t >= t_end {
            return Ok(traj);
        }
        let fac = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
        h *= if rejected { fac.min(1.0) } else { fac };
        rejected = false;
    }
    Err(Error::TooManySteps(ctl.max_steps))
}
