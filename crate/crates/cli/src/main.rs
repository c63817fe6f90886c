//! `janossy`: bounds tables, cover checks, rigidity checks, collision search
//! and training sweeps.
//!
//! Exit codes: 0 success, 1 a check failed or no certificate was found,
//! 2 usage error. Every file output is written next to a JSON copy of the
//! fully resolved configuration, seeds included.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use janossy_core::bounds::IntRange;

/// Default directory for outputs when `--out` is not given.
pub const OUT_DIR_ENV: &str = "JANOSSY_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "janossy",
    version,
    about = "Latent-dimension lower bounds for Deep Sets and Janossy pooling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lower and known upper bounds as CSV.
    Bounds(BoundsArgs),
    /// Simplex cover invariants and Monte Carlo antipodal-freeness.
    CoverCheck(CoverArgs),
    /// Finite-difference rigidity over random indexed encoders.
    RigidityCheck(RigidityArgs),
    /// Antipodal collision search on one encoder, or re-verification of a certificate.
    CollisionFind(CollisionArgs),
    /// Train and attack one model per latent dimension.
    TrainSweep(SweepArgs),
}

#[derive(Args, serde::Serialize)]
pub struct BoundsArgs {
    /// Inclusive range `a..b` or a single value.
    #[arg(long, default_value = "1..4")]
    pub d_range: IntRange,
    #[arg(long, default_value = "2..8")]
    pub n_range: IntRange,
    #[arg(long, default_value = "1..3")]
    pub k_range: IntRange,
    /// CSV path; standard output when omitted and the output directory variable is unset.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, serde::Serialize)]
pub struct CoverArgs {
    /// Sphere ambient dimension.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub b: u64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, serde::Serialize)]
pub struct RigidityArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    /// Latent dimension.
    #[arg(long = "M")]
    pub m: usize,
    #[arg(long, default_value_t = 20)]
    pub encoders: usize,
    #[arg(long, default_value_t = 20)]
    pub tails: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    /// Also run the product-map control, which must fail.
    #[arg(long)]
    pub negative_control: bool,
}

#[derive(Args, serde::Serialize)]
pub struct CollisionArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long = "M")]
    pub m: Option<usize>,
    /// Encoder JSON (as written inside a certificate file).
    #[arg(long, conflicts_with = "random_seed")]
    pub encoder_file: Option<PathBuf>,
    /// Seed for a random indexed tanh encoder.
    #[arg(long)]
    pub random_seed: Option<u64>,
    /// Hidden width of random encoder members.
    #[arg(long, default_value_t = 8)]
    pub width: usize,
    #[arg(long, default_value_t = 100)]
    pub restarts: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.25)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 200)]
    pub samples_per_region: usize,
    /// Certificate output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Re-verify a stored certificate instead of searching.
    #[arg(long, value_name = "CERT", conflicts_with_all = ["encoder_file", "random_seed"])]
    pub verify: Option<PathBuf>,
}

#[derive(Args, serde::Serialize)]
pub struct SweepArgs {
    /// Sweep configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the configured global seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configured latent dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub latent_dims: Option<Vec<usize>>,
    /// Reuse a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

/// A failure with its exit code.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self {
            code: 1,
            message: format!("{e:#}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let result = match cli.command {
        Command::Bounds(a) => commands::bounds(&a, out_dir),
        Command::CoverCheck(a) => commands::cover_check(&a),
        Command::RigidityCheck(a) => commands::rigidity_check(&a),
        Command::CollisionFind(a) => commands::collision_find(&a, out_dir),
        Command::TrainSweep(a) => commands::train_sweep(&a, out_dir),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
