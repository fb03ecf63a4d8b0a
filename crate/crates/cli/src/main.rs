//! `synth`: scenario-driven sparse array synthesis and imaging.
//!
//! Usage: `synth <scenario.toml> <command> [--out DIR] [--seed U64]
//! [--dynamic-range DB]`. Commands: `synthesize`, `image`, `psf`,
//! `metrics`, `compare`. Set `SYNTH_THREADS` to pin the worker thread
//! count; results are identical for any value.
//!
//! On failure the process prints one JSON object to stderr,
//! `{"error":{"kind":...,"message":...}}`, and exits nonzero.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nfsas_cli::error::{CliError, Result};
use nfsas_cli::runner::{self, Command, Overrides};
use nfsas_cli::scenario;

#[derive(Parser)]
#[command(
    name = "synth",
    version,
    about = "Sparse wideband MIMO array synthesis for near-field imaging"
)]
struct Cli {
    /// Scenario file (TOML).
    scenario: PathBuf,
    #[command(subcommand)]
    command: CommandArg,
    /// Output directory, overriding the scenario's [output] dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replaces every random-baseline seed in the scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Display dynamic range in dB for metrics and comparisons.
    #[arg(long = "dynamic-range", global = true)]
    dynamic_range: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum CommandArg {
    /// Solve for a sparse topology and write synthesized.csv plus
    /// diagnostics.
    Synthesize,
    /// Render complex images of every scene for each topology.
    Image,
    /// Characterize point-spread functions of single-point scenes.
    Psf,
    /// Score sparse topologies against the dense array.
    Metrics,
    /// Images, PSF reports, and metrics for all topologies in one run.
    Compare,
}

fn execute(cli: &Cli) -> Result<()> {
    let scn = scenario::load(&cli.scenario)?;
    let command = match cli.command {
        CommandArg::Synthesize => Command::Synthesize,
        CommandArg::Image => Command::Image,
        CommandArg::Psf => Command::Psf,
        CommandArg::Metrics => Command::Metrics,
        CommandArg::Compare => Command::Compare,
    };
    let overrides = Overrides {
        out: cli.out.clone(),
        seed: cli.seed,
        dynamic_range_db: cli.dynamic_range,
    };
    runner::run(&scn, command, &overrides)
}

fn error_json(e: &CliError) -> String {
    serde_json::json!({
        "error": { "kind": e.kind(), "message": e.to_string() }
    })
    .to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    if let Ok(raw) = std::env::var("SYNTH_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n > 0 => {
                // Ignore failure: the global pool may already exist.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => log::warn!("ignoring SYNTH_THREADS={raw:?}: expected a positive integer"),
        }
    }
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
