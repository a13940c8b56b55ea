//! Command-line harness for the spinmesh toolkit.
//!
//! Every command writes CSV preceded by `#` lines echoing its resolved
//! configuration. Exit codes: 0 success, 1 certification or validation
//! failure, 2 usage error, 3 numeric error.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub mod commands;
pub mod config;

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const THREADS_ENV: &str = "SPINMESH_THREADS";

#[derive(Parser, Debug)]
#[command(name = "spinmesh", version, about = "Quantum state transfer on XX spin networks")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// Seed for all Monte Carlo sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write CSV here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; CSV is the only one.
    #[arg(long, global = true, default_value = "csv", value_parser = ["csv"])]
    pub format: String,
    /// Flat TOML file of command keys (same names as the long flags).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Certify the antipodal swap of the single-magnon propagator.
    Certify(CertifyArgs),
    /// Exact average fidelity versus channel spin S0.
    Fig2(Fig2Args),
    /// Bath-dephased average fidelity sweeps.
    Fig3(Fig3Args),
    /// Exact average fidelity at one (d, S0, t) point.
    AvgFidelity(AvgFidelityArgs),
    /// Recompute the lattice constants zeta.
    Zeta(ZetaArgs),
    /// Quick end-to-end consistency checks.
    Selftest(SelftestArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Certify(_) => "certify",
            Command::Fig2(_) => "fig2",
            Command::Fig3(_) => "fig3",
            Command::AvgFidelity(_) => "avg-fidelity",
            Command::Zeta(_) => "zeta",
            Command::Selftest(_) => "selftest",
        }
    }
}

/// Network selection shared by commands that evolve a channel.
#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
pub struct NetworkArgs {
    /// Hypercube built from a path block, e.g. `theta=1,g=3`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypercube: Option<String>,
    /// Chain with engineered or uniform couplings.
    #[arg(long, value_parser = ["engineered", "uniform"])]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<String>,
    /// Adjacency matrix file (dense text or `u v weight` edge list).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacency: Option<PathBuf>,
    /// Chain length.
    #[arg(long = "N0")]
    #[serde(default, rename = "N0", skip_serializing_if = "Option::is_none")]
    pub n0: Option<usize>,
    /// Engineered-chain coupling parameter.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g0: Option<f64>,
    /// Coupling strength for hypercubes, uniform chains and adjacency files.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
pub struct CertifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub network: NetworkArgs,
    /// Site spin.
    #[arg(long = "S0")]
    #[serde(default, rename = "S0", skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    /// Evaluation time; defaults to the closed-form swap time.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    /// One pair `m,mbar` (1-based); defaults to every antipodal pair.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<Vec<usize>>,
    #[arg(long = "tol-modulus")]
    #[serde(default, rename = "tol-modulus", skip_serializing_if = "Option::is_none")]
    pub tol_modulus: Option<f64>,
    #[arg(long = "tol-phase")]
    #[serde(default, rename = "tol-phase", skip_serializing_if = "Option::is_none")]
    pub tol_phase: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
pub struct Fig2Args {
    #[command(flatten)]
    #[serde(flatten)]
    pub network: NetworkArgs,
    /// Qudit dimensions.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<usize>>,
    /// Channel spins; by default 3/2 (or the smallest admissible) to 10 in steps of 1/2.
    #[arg(long = "S0-grid", value_delimiter = ',')]
    #[serde(default, rename = "S0-grid", skip_serializing_if = "Option::is_none")]
    pub s0_grid: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
pub struct AvgFidelityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub network: NetworkArgs,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[arg(long = "S0")]
    #[serde(default, rename = "S0", skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    /// Evaluation time; defaults to the closed-form swap time.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
pub struct Fig3Args {
    /// Panel a sweeps J0, b sweeps T, c sweeps g0.
    #[arg(long, value_parser = ["a", "b", "c"])]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel: Option<String>,
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<usize>>,
    #[arg(long, value_parser = ["sc", "bcc"])]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<String>,
    /// Bath exchange; every emitted energy is in units of J.
    #[arg(long = "J")]
    #[serde(default, rename = "J", skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    /// Bath spin.
    #[arg(long = "S")]
    #[serde(default, rename = "S", skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Channel spin, entering through the transfer time.
    #[arg(long = "S0")]
    #[serde(default, rename = "S0", skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    /// Channel-bath coupling in units of J (panels b, c).
    #[arg(long = "J0")]
    #[serde(default, rename = "J0", skip_serializing_if = "Option::is_none")]
    pub j0: Option<f64>,
    /// Chain coupling in units of J (panels a, b).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g0: Option<f64>,
    /// Temperature as a fraction of T_N (panels a, c).
    #[arg(long = "T-over-TN")]
    #[serde(default, rename = "T-over-TN", skip_serializing_if = "Option::is_none")]
    pub t_over_tn: Option<f64>,
    /// Sweep start (J0/J, T/T_N or g0/J by panel).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Finite bath size per sublattice; omit for the thermodynamic limit.
    #[arg(long = "N")]
    #[serde(default, rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
pub struct ZetaArgs {
    #[arg(long, value_parser = ["sc", "bcc", "all"])]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<String>,
    /// Quadrature points per axis (at least 32).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
pub struct SelftestArgs {
    /// Monte Carlo samples for the moment checks.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(spinmesh::Error),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<spinmesh::Error> for CliError {
    fn from(e: spinmesh::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use spinmesh::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io(_) => EXIT_USAGE,
            CliError::Core(E::Domain(_) | E::Unsupported(_) | E::Parse { .. }) => EXIT_USAGE,
            CliError::Core(E::Validation(_) | E::Size { .. }) => EXIT_FAILURE,
            CliError::Core(E::Numeric(_)) => EXIT_NUMERIC,
        }
    }
}

/// CSV text of a finished command and whether its checks passed.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub csv: String,
    pub passed: bool,
}

/// Runs a parsed command line and writes its output; returns the exit code.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    let report = commands::execute(&cli.global, &cli.command)?;
    match &cli.global.out {
        Some(path) => std::fs::write(path, &report.csv)?,
        None => std::io::stdout().lock().write_all(report.csv.as_bytes())?,
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_FAILURE })
}

/// Caps the global worker pool from `SPINMESH_THREADS`, if set.
pub fn configure_threads(value: Option<&str>) -> Result<(), CliError> {
    let Some(raw) = value else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure {n} worker threads: {e}")))
}
