//! `colt` command-line entry point.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use colt_core::config::RunConfig;
use colt_core::env::SynthKernel;
use colt_core::harness::{run_experiment, run_sweep};
use colt_core::program::render_trace;
use colt_core::Error;

#[derive(Parser)]
#[command(name = "colt", version, about = "Collaborative multi-model tree search over a synthetic kernel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one search and write its log, report and table.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `search.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustively find the best trace up to a horizon.
    Oracle {
        #[arg(long)]
        horizon: usize,
    },
    /// Repeat a run over several seeds and aggregate the results.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Config(_) | Error::UnknownModel(_)) => 2,
        Some(Error::ProposerUnavailable(_)) => 3,
        Some(Error::Io(_)) => 4,
        Some(Error::OracleBudgetExceeded { .. }) => 5,
        _ if err.chain().any(|e| e.downcast_ref::<std::io::Error>().is_some()) => 4,
        _ => 1,
    }
}

fn load(path: &Path) -> Result<RunConfig> {
    RunConfig::load(path).with_context(|| format!("invalid configuration {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = load(&config)?;
            if let Some(seed) = seed {
                cfg.search.seed = seed;
            }
            if let Some(out) = out {
                cfg.output.dir = out;
            }
            let dir = cfg.output.dir.clone();
            let outcome = run_experiment(&cfg, &dir).with_context(|| format!("run failed (outputs in {})", dir.display()))?;
            print!("{}", outcome.report.render_table(&format!("seed {}", cfg.search.seed)));
            println!("outputs written to {}", dir.display());
        }
        Command::Oracle { horizon } => {
            let res = SynthKernel::default().brute_force_optimum(horizon)?;
            println!("horizon: {horizon}");
            println!("best_trace: {}", render_trace(&res.best_trace));
            println!("best_speedup: {}", res.best_speedup);
            println!("states_enumerated: {}", res.states_enumerated);
        }
        Command::Sweep { config, seeds, out } => {
            let cfg = load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let agg = run_sweep(&cfg, &seeds, &dir)?;
            for row in &agg.rows {
                match (&row.error, row.best_speedup) {
                    (Some(e), _) => println!("seed {:>6}: FAILED {e}", row.seed),
                    (None, Some(best)) => println!("seed {:>6}: best {best:.4}x", row.seed),
                    (None, None) => println!("seed {:>6}: no result", row.seed),
                }
            }
            if let Some(s) = &agg.best_speedup {
                println!("best speedup: {:.4} ± {:.4} over {} run(s)", s.mean, s.std, agg.succeeded);
            }
            println!("outputs written to {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
