use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nvpoly::quadrature::QuadratureConfig;
use nvpoly::radial_ode::SolverConfig;
use nvpoly::steady_state::GreensConfig;
use nvpoly::variational::VariationalConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub a_min: f64,
    pub a_max: f64,
    pub points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { a_min: -3.0, a_max: -0.05, points: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub nr: usize,
    pub np: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nr: 256, np: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub multiplier_tol: f64,
    pub virial_tol: f64,
    pub exterior_tol: f64,
    pub greens_nodes: usize,
    pub greens_tol: f64,
    pub closed_form_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            multiplier_tol: 1e-4,
            virial_tol: 1e-2,
            exterior_tol: 1e-8,
            greens_nodes: 1024,
            greens_tol: 1e-6,
            closed_form_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispersionConfig {
    pub t_max: f64,
    pub t_points: usize,
    /// Optional `∫∫ x·p f` for correlated data.
    pub xp_moment: Option<f64>,
}

impl Default for DispersionConfig {
    fn default() -> Self {
        Self { t_max: 10.0, t_points: 101, xp_moment: None }
    }
}

/// Every parameter a run can use. Loaded from JSON, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub k: f64,
    pub a: f64,
    pub c: f64,
    /// Mass and norm targets for `minimize`; taken from the steady state at `(k, a, c)` when absent.
    pub mass: Option<f64>,
    pub norm: Option<f64>,
    pub output_dir: PathBuf,
    pub quadrature: QuadratureConfig,
    pub ode: SolverConfig,
    pub sweep: SweepConfig,
    pub grid: GridConfig,
    pub greens: GreensConfig,
    pub variational: VariationalConfig,
    pub verify: VerifyConfig,
    pub dispersion: DispersionConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k: 1.0,
            a: -1.0,
            c: 1.0,
            mass: None,
            norm: None,
            output_dir: PathBuf::from("."),
            quadrature: QuadratureConfig::default(),
            ode: SolverConfig::default(),
            sweep: SweepConfig::default(),
            grid: GridConfig::default(),
            greens: GreensConfig::default(),
            variational: VariationalConfig::default(),
            verify: VerifyConfig::default(),
            dispersion: DispersionConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Solver settings with the shared quadrature block applied.
    pub fn solver(&self) -> SolverConfig {
        let mut s = self.ode;
        s.quadrature = self.quadrature;
        s
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        if !(self.k > 0.0 && self.k < 2.0) {
            return bad(format!("k must lie in (0, 2), got {}", self.k));
        }
        if !(self.a < 0.0) || !self.a.is_finite() {
            return bad(format!("a must be negative, got {}", self.a));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return bad(format!("c must be positive, got {}", self.c));
        }
        for (name, v) in [("mass", self.mass), ("norm", self.norm)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return bad(format!("{name} must be positive, got {v}"));
                }
            }
        }
        if self.mass.is_some() != self.norm.is_some() {
            return bad("mass and norm must be given together".into());
        }
        let s = &self.sweep;
        if !(s.a_min < s.a_max) || !(s.a_max < 0.0) || s.points < 2 {
            return bad("sweep needs a_min < a_max < 0 and at least 2 points".into());
        }
        if self.grid.nr < 3 || self.grid.np < 2 {
            return bad("grid needs nr >= 3 and np >= 2".into());
        }
        if self.verify.greens_nodes < 3 {
            return bad("verify.greens_nodes must be at least 3".into());
        }
        let d = &self.dispersion;
        if !(d.t_max > 0.0) || d.t_points < 2 {
            return bad("dispersion needs t_max > 0 and t_points >= 2".into());
        }
        self.quadrature.validate().map_err(CliError::from)?;
        self.solver().validate().map_err(CliError::from)?;
        self.variational.validate().map_err(CliError::from)?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
