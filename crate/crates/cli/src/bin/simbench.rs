//! `simbench` — desk-scale simulation studies, one subcommand per design,
//! emitting CSV tables with standard-error columns.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use streamstat_core::sim::{
    run_fpfn_study, run_ginv_invariance, run_poisson_bias, run_power_study, run_rmse_vs_k,
    FpFnStudyConfig, GinvInvarianceConfig, PoissonBiasConfig, PowerStudyConfig, RmseVsKConfig,
    Table,
};

#[derive(Parser)]
#[command(
    name = "simbench",
    about = "Simulation studies for the streaming inference engine",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunnerArgs {
    /// JSON config for the study; defaults are the desk-scale design.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the CSV table.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Replicates.
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Rejection rates of the global outlier tests (normal and asymptotic F).
    Power(RunnerArgs),
    /// False positives/negatives of the per-observation outlier tests.
    Fpfn(RunnerArgs),
    /// CEE vs CUEE RMSE over a grid of block counts.
    RmseVsK(RunnerArgs),
    /// Robust Poisson bias and RMSE ratios against the pooled fit.
    PoissonBias(RunnerArgs),
    /// CUEE invariance to the generalized inverse under rank-deficient chunks.
    GinvInvariance(RunnerArgs),
}

fn workers() -> usize {
    std::env::var("STREAMSTAT_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&PathBuf>) -> anyhow::Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

fn emit(table: &Table, dir: &Path, name: &str) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    table.write_csv(&path)?;
    println!("wrote {} ({} rows)", path.display(), table.rows.len());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Power(args) => {
            let cfg: PowerStudyConfig = load_config(args.config.as_ref())?;
            let table = run_power_study(&cfg, args.reps.unwrap_or(500), args.seed, workers())?;
            emit(&table, &args.out, "power.csv")
        }
        Command::Fpfn(args) => {
            let cfg: FpFnStudyConfig = load_config(args.config.as_ref())?;
            let table = run_fpfn_study(&cfg, args.reps.unwrap_or(500), args.seed, workers())?;
            emit(&table, &args.out, "fpfn.csv")
        }
        Command::RmseVsK(args) => {
            let cfg: RmseVsKConfig = load_config(args.config.as_ref())?;
            let table = run_rmse_vs_k(&cfg, args.reps.unwrap_or(50), args.seed, workers())?;
            emit(&table, &args.out, "rmse_vs_k.csv")
        }
        Command::PoissonBias(args) => {
            let cfg: PoissonBiasConfig = load_config(args.config.as_ref())?;
            let table = run_poisson_bias(&cfg, args.reps.unwrap_or(100), args.seed, workers())?;
            emit(&table, &args.out, "poisson_bias.csv")
        }
        Command::GinvInvariance(args) => {
            let cfg: GinvInvarianceConfig = load_config(args.config.as_ref())?;
            let summary = run_ginv_invariance(&cfg, args.reps.unwrap_or(100), args.seed, workers())?;
            println!("max generalized-inverse gap: {:.3e}", summary.max_ginv_gap);
            emit(&summary.table, &args.out, "ginv_invariance.csv")
        }
    }
}
