//! Command-line front end: configuration, dispatch and file output.
//!
//! [`run`] is the whole program; the binary only forwards its arguments and
//! exit code.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

mod commands;
pub mod config;

pub use config::RunConfig;

/// Environment variable naming a default config file.
pub const CONFIG_ENV: &str = "NVPOLY_CONFIG";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IDENTITY: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_NO_INPUT: i32 = 66;
pub const EXIT_IO: i32 = 74;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read config: {0}")]
    Config(String),
    #[error("cannot read input: {0}")]
    Input(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("{} identity check(s) failed", .0.len())]
    Identity(Vec<serde_json::Value>),
    #[error(transparent)]
    Numeric(#[from] nvpoly::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use nvpoly::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) | CliError::Input(_) => EXIT_NO_INPUT,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Identity(_) => EXIT_IDENTITY,
            CliError::Numeric(E::InvalidParameter(_) | E::InvalidGrid(_) | E::Shape(_) | E::DegeneratePair { .. }) => {
                EXIT_VALIDATION
            }
            CliError::Numeric(_) => EXIT_FAILURE,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nvpoly", version, about = "Polytrope steady states: solve, sweep, verify")]
struct Cli {
    /// JSON config file (defaults to $NVPOLY_CONFIG when set).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel work (default: available processors).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Default, Args)]
struct Params {
    /// Polytropic index in (0, 2).
    #[arg(long, allow_negative_numbers = true)]
    k: Option<f64>,
    /// Shooting parameter ψ̃(0) < 0.
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    /// Multiplier c > 0 fixing the physical scale.
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
struct Grid {
    #[arg(long)]
    nr: Option<usize>,
    #[arg(long)]
    np: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the scaled field equation for one shooting parameter.
    Solve {
        #[command(flatten)]
        params: Params,
    },
    /// Tabulate crossings and masses over a range of shooting parameters.
    Sweep {
        #[command(flatten)]
        params: Params,
        #[arg(long, allow_negative_numbers = true)]
        a_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        a_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Scale to physical variables and check the multiplier identities.
    Physical {
        #[command(flatten)]
        params: Params,
    },
    /// Minimize the energy directly on a phase-space grid.
    Minimize {
        #[command(flatten)]
        params: Params,
        /// Target mass (with --norm; otherwise taken from the steady state).
        #[arg(long)]
        mass: Option<f64>,
        /// Target L^{1+1/k} norm.
        #[arg(long)]
        norm: Option<f64>,
        #[command(flatten)]
        grid: Grid,
    },
    /// Run the identity battery on one steady state.
    Verify {
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        grid: Grid,
    },
    /// Conformal-energy coefficients and the dispersion bound.
    Dispersion {
        #[command(flatten)]
        params: Params,
        /// Distribution or phase-space state as JSON; the steady state is used otherwise.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        t_points: Option<usize>,
        /// Value of ∫∫ x·p f for correlated input.
        #[arg(long, allow_negative_numbers = true)]
        xp_moment: Option<f64>,
        #[command(flatten)]
        grid: Grid,
    },
}

fn apply_params(cfg: &mut RunConfig, p: &Params) {
    if let Some(k) = p.k {
        cfg.k = k;
    }
    if let Some(a) = p.a {
        cfg.a = a;
    }
    if let Some(c) = p.c {
        cfg.c = c;
    }
}

fn apply_grid(cfg: &mut RunConfig, g: &Grid) {
    if let Some(n) = g.nr {
        cfg.grid.nr = n;
    }
    if let Some(n) = g.np {
        cfg.grid.np = n;
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli.config.clone().or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
    let mut cfg = match path {
        Some(p) => RunConfig::load(&p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    match &cli.command {
        Command::Solve { params } | Command::Physical { params } => apply_params(&mut cfg, params),
        Command::Sweep { params, a_min, a_max, points } => {
            apply_params(&mut cfg, params);
            if let Some(v) = a_min {
                cfg.sweep.a_min = *v;
            }
            if let Some(v) = a_max {
                cfg.sweep.a_max = *v;
            }
            if let Some(v) = points {
                cfg.sweep.points = *v;
            }
        }
        Command::Minimize { params, mass, norm, grid } => {
            apply_params(&mut cfg, params);
            if mass.is_some() {
                cfg.mass = *mass;
            }
            if norm.is_some() {
                cfg.norm = *norm;
            }
            if let Some(n) = grid.nr {
                cfg.variational.nr = n;
            }
            if let Some(n) = grid.np {
                cfg.variational.np = n;
            }
        }
        Command::Verify { params, grid } => {
            apply_params(&mut cfg, params);
            apply_grid(&mut cfg, grid);
        }
        Command::Dispersion { params, t_max, t_points, xp_moment, grid, .. } => {
            apply_params(&mut cfg, params);
            apply_grid(&mut cfg, grid);
            if let Some(v) = t_max {
                cfg.dispersion.t_max = *v;
            }
            if let Some(v) = t_points {
                cfg.dispersion.t_points = *v;
            }
            if xp_moment.is_some() {
                cfg.dispersion.xp_moment = *xp_moment;
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse(args: Vec<OsString>) -> Result<Cli, i32> {
    Cli::try_parse_from(args).map_err(|e| {
        let code = match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
            ErrorKind::InvalidSubcommand
            | ErrorKind::MissingSubcommand
            | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_USAGE,
            _ => EXIT_VALIDATION,
        };
        let _ = e.print();
        code
    })
}

/// Runs the program on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match parse(args) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let level = if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();

    let result = load_config(&cli).and_then(|cfg| {
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(j) = cli.jobs {
            if j == 0 {
                return Err(CliError::Validation("--jobs must be positive".into()));
            }
            pool = pool.num_threads(j);
        }
        let pool = pool.build().map_err(|e| CliError::Usage(e.to_string()))?;
        pool.install(|| commands::dispatch(&cli.command, &cfg))
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Identity(failures)) => {
            let n = failures.len();
            let doc = serde_json::json!({ "failures": failures });
            eprintln!("{doc}");
            log::error!("{n} identity check(s) failed");
            EXIT_IDENTITY
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
