//! `streamstat` — chunked CSV ingestion with online-updated estimates,
//! diagnostics and resumable snapshots.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use streamstat_cli::config::ModelConfig;
use streamstat_cli::engine::run_stream;
use streamstat_cli::error::CliError;
use streamstat_cli::report::{
    build_report, contrast_test, parse_contrast, render_anova, render_coefficients,
    render_contrast, render_diagnostics,
};
use streamstat_cli::snapshot::StreamSnapshot;

#[derive(Parser)]
#[command(
    name = "streamstat",
    about = "Streaming statistical inference over chunked CSV data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a CSV stream chunk by chunk and update the model state.
    Stream {
        /// Model configuration (JSON).
        #[arg(long)]
        model: PathBuf,
        /// Input CSV path, or `-` for standard input.
        #[arg(long = "in", value_name = "CSV")]
        input: String,
        /// Rows per chunk (overrides the config value).
        #[arg(long)]
        chunk_size: Option<usize>,
        /// Snapshot path; read when it exists (resume), rewritten after every
        /// accumulation point.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Directory for the machine-readable report and per-chunk diagnostics.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop after this many accumulation points (snapshot still written).
        #[arg(long)]
        max_chunks: Option<usize>,
    },
    /// Inspect a snapshot.
    Report {
        #[arg(long)]
        snapshot: PathBuf,
        /// What to print: coef | anova | wald | diag.
        #[arg(long)]
        what: String,
        /// Contrast matrix for `wald` (headerless CSV, q rows, p columns).
        #[arg(long)]
        contrast: Option<PathBuf>,
        /// Directory for the JSON twin of the printed table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn write_json<T: serde::Serialize>(
    dir: &std::path::Path,
    name: &str,
    value: &T,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(value).map_err(|e| CliError::other(e.to_string()))?)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Stream {
            model,
            input,
            chunk_size,
            snapshot,
            out,
            max_chunks,
        } => {
            let config = ModelConfig::from_path(&model)?;
            let outcome = run_stream(
                &config,
                &input,
                snapshot.as_deref(),
                max_chunks,
                chunk_size,
            )?;
            let report = build_report(&outcome.snapshot)?;
            print!("{}", render_coefficients(&report));
            if report.anova.is_some() {
                print!("{}", render_anova(&report));
            }
            if let Some(w) = &report.global_wald {
                println!(
                    "global Wald (all slopes): W = {:.6}, df = {}, p = {:.4e}",
                    w.w, w.df, w.p_value
                );
            }
            if let Some(dir) = out {
                write_json(&dir, "report.json", &report)?;
                if !outcome.diagnostics.is_empty() {
                    write_json(&dir, "diagnostics.json", &outcome.diagnostics)?;
                }
            }
            if outcome.snapshot.singular {
                eprintln!("warning: cumulative design is singular; estimates deferred");
            }
            Ok(())
        }
        Command::Report {
            snapshot,
            what,
            contrast,
            out,
        } => {
            let snap = StreamSnapshot::load(&snapshot)?;
            match what.as_str() {
                "coef" => {
                    let report = build_report(&snap)?;
                    print!("{}", render_coefficients(&report));
                    if let Some(dir) = out {
                        write_json(&dir, "coef.json", &report)?;
                    }
                }
                "anova" => {
                    let report = build_report(&snap)?;
                    print!("{}", render_anova(&report));
                    if let Some(dir) = out {
                        write_json(&dir, "anova.json", &report.anova)?;
                    }
                }
                "wald" => {
                    let p = match (&snap.lm_state(), &snap.cee_state(), &snap.cuee_state()) {
                        (Some(s), _, _) => s.p(),
                        (_, Some(s), _) => s.p(),
                        (_, _, Some(s)) => s.p(),
                        _ => return Err(CliError::other("unrecognized snapshot engine")),
                    };
                    let c = contrast
                        .map(|path| parse_contrast(&path, p))
                        .transpose()?;
                    let t = contrast_test(&snap, c.as_ref())?;
                    print!("{}", render_contrast(&t));
                    if let Some(dir) = out {
                        write_json(&dir, "wald.json", &t)?;
                    }
                }
                "diag" => {
                    print!("{}", render_diagnostics(&snap));
                    if let Some(dir) = out {
                        write_json(&dir, "diag.json", &snap.last_diagnostics)?;
                    }
                }
                other => {
                    return Err(CliError::other(format!(
                        "unknown report `{other}` (expected coef|anova|wald|diag)"
                    )))
                }
            }
            Ok(())
        }
    }
}
