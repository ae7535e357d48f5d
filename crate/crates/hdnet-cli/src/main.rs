//! Command-line surface for the pipeline: generate datasets, encode units,
//! estimate effects, sweep configurations, and benchmark stages.
//!
//! Every command is seed-reproducible and writes a manifest next to its
//! outputs. Exit codes: 0 success, 2 usage error, 1 runtime failure.

mod cmds;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hdnet::estimator::Weighting;

#[derive(Parser)]
#[command(
    name = "hdnet",
    version,
    about = "Training-free causal effect estimation on networked units",
    propagate_version = true
)]
struct Cli {
    /// Worker threads for parallel stages; 0 uses all cores. Falls back to
    /// the HDNET_THREADS environment variable when absent.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset bundle
    Generate(GenerateArgs),
    /// Encode a dataset bundle into node codes
    Encode(EncodeArgs),
    /// Estimate treatment effects on a dataset bundle
    Estimate(EstimateArgs),
    /// Run a seeded configuration grid and summarize the metrics
    Sweep(SweepArgs),
    /// Time the encode and match stages across dataset sizes
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Output directory (created if missing; its parent must exist)
    #[arg(long)]
    out: PathBuf,
    /// Built-in configuration name; hyphens and underscores both accepted
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// Generator configuration JSON (a bundle's gen_config.json works as-is)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the seed in --config
    #[arg(long)]
    seed: Option<u64>,
    /// Overwrite existing outputs
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct EncodeArgs {
    /// Dataset bundle directory
    #[arg(long)]
    data: PathBuf,
    /// Output directory (created if missing; its parent must exist)
    #[arg(long)]
    out: PathBuf,
    /// Code dimension
    #[arg(long, default_value_t = 10_000, value_parser = positive_usize)]
    beta: usize,
    /// Hyperplane offset scale; defaults to three times the largest row norm
    #[arg(long, value_parser = nonneg_finite)]
    lambda: Option<f64>,
    /// Hops of network context bound into each code
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(0..=2))]
    depth: u8,
    /// Z-score covariate columns before encoding
    #[arg(long)]
    standardize: bool,
    /// Run seed for the encoder, role vectors, and tie-breaking
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overwrite existing outputs
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct EstimateArgs {
    /// Dataset bundle directory
    #[arg(long)]
    data: PathBuf,
    /// Output directory (created if missing; its parent must exist)
    #[arg(long)]
    out: PathBuf,
    /// Code dimension
    #[arg(long, default_value_t = 10_000, value_parser = positive_usize)]
    beta: usize,
    /// Hyperplane offset scale; defaults to three times the largest row norm
    #[arg(long, value_parser = nonneg_finite)]
    lambda: Option<f64>,
    /// Donors per counterfactual imputation
    #[arg(long, default_value_t = 5, value_parser = positive_usize)]
    k: usize,
    /// Hops of network context bound into each code
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(0..=2))]
    depth: u8,
    /// Donor weighting scheme
    #[arg(long, value_enum, default_value_t = WeightingArg::InverseDistance)]
    weighting: WeightingArg,
    /// Held-out fraction of units
    #[arg(long, default_value_t = 0.2, value_parser = open_unit_interval)]
    split_frac: f64,
    /// Z-score covariate columns before encoding
    #[arg(long)]
    standardize: bool,
    /// Run seed; encoder, roles, ties, and split derive from it
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overwrite existing outputs
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Output directory (created if missing; its parent must exist)
    #[arg(long)]
    out: PathBuf,
    /// Preset names to sweep, comma-separated
    #[arg(
        long,
        value_delimiter = ',',
        conflicts_with = "kappa1",
        required_unless_present = "kappa1"
    )]
    preset: Vec<String>,
    /// One-hop confounding dial values to sweep, comma-separated
    #[arg(long, value_delimiter = ',', value_parser = finite_f64)]
    kappa1: Vec<f64>,
    /// Hop depths to evaluate each cell at, comma-separated
    #[arg(long, value_delimiter = ',', default_values_t = [0u8, 1, 2],
          value_parser = clap::value_parser!(u8).range(0..=2))]
    depths: Vec<u8>,
    /// Number of seeded repetitions per cell
    #[arg(long, default_value_t = 10, value_parser = positive_usize)]
    seeds: usize,
    /// First seed; repetitions use seed, seed+1, ...
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Code dimension
    #[arg(long, default_value_t = 10_000, value_parser = positive_usize)]
    beta: usize,
    /// Override the unit count of every cell's configuration
    #[arg(long, value_parser = at_least_two)]
    n: Option<usize>,
    /// Overwrite existing outputs
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Output directory (created if missing; its parent must exist)
    #[arg(long)]
    out: PathBuf,
    /// Dataset sizes to time, comma-separated
    #[arg(long, value_delimiter = ',', default_values_t = [2000usize, 4000],
          value_parser = at_least_two)]
    sizes: Vec<usize>,
    /// Code dimension
    #[arg(long, default_value_t = 10_000, value_parser = positive_usize)]
    beta: usize,
    /// Repetitions per size; variance shows up as standard errors
    #[arg(long, default_value_t = 3, value_parser = positive_usize)]
    reps: usize,
    /// Master seed for the generated datasets and runs
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overwrite existing outputs
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    InverseDistance,
    Uniform,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Weighting {
        match w {
            WeightingArg::InverseDistance => Weighting::InverseDistance,
            WeightingArg::Uniform => Weighting::Uniform,
        }
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("not an unsigned integer: {s:?}"))?;
    if v == 0 {
        return Err("must be at least 1".into());
    }
    Ok(v)
}

fn at_least_two(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("not an unsigned integer: {s:?}"))?;
    if v < 2 {
        return Err("must be at least 2".into());
    }
    Ok(v)
}

fn nonneg_finite(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if !v.is_finite() || v < 0.0 {
        return Err("must be finite and nonnegative".into());
    }
    Ok(v)
}

fn finite_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if !v.is_finite() {
        return Err("must be finite".into());
    }
    Ok(v)
}

fn open_unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if !(v > 0.0 && v < 1.0) {
        return Err("must lie strictly between 0 and 1".into());
    }
    Ok(v)
}

/// Flag beats environment beats default. 0 means all cores.
fn configure_threads(flag: Option<usize>) -> Result<(), String> {
    let threads = match flag {
        Some(n) => n,
        None => match std::env::var("HDNET_THREADS") {
            Ok(raw) => raw
                .trim()
                .parse::<usize>()
                .map_err(|_| format!("HDNET_THREADS must be a nonnegative integer, got {raw:?}"))?,
            Err(_) => 0,
        },
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| format!("thread pool setup failed: {e}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    if let Err(msg) = configure_threads(cli.threads) {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }

    let result = match cli.command {
        Cmd::Generate(args) => cmds::generate(args),
        Cmd::Encode(args) => cmds::encode(args),
        Cmd::Estimate(args) => cmds::estimate(args),
        Cmd::Sweep(args) => cmds::sweep(args),
        Cmd::Bench(args) => cmds::bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
