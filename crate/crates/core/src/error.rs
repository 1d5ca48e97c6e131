use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("integrand is not integrable: {0}")]
    NonIntegrable(String),

    #[error("adaptive quadrature exceeded {intervals} subintervals (error estimate {error:e})")]
    QuadratureLimit { intervals: usize, error: f64 },

    #[error("step size underflow at r = {r:e}")]
    StepSizeUnderflow { r: f64 },

    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),

    #[error("profile has no crossing: {0}")]
    NoCrossing(String),

    #[error("degenerate shooting pair: a1 = {a1}, a2 = {a2}")]
    DegeneratePair { a1: f64, a2: f64 },

    #[error("both ends of [{lo}, {hi}] lie in the same regime")]
    SameRegime { lo: f64, hi: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NotConverged { what: String, iterations: usize },

    #[error("distribution is identically zero")]
    ZeroDistribution,

    #[error("gradient norm vanishes")]
    ZeroGradient,

    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, Error>;
