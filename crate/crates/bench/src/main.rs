use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use decbandit::analytics::bound_report;
use decbandit_bench::runner::{g9, SweepParam};
use decbandit_bench::{load_config, run_experiment, run_sweep, BenchError, ExperimentConfig};

/// Monte Carlo experiments for decentralized multi-player bandits under TDFS.
#[derive(Parser)]
#[command(name = "decbandit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write regret.csv and summary.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `trials` from the config.
        #[arg(long)]
        trials: Option<usize>,
        /// Overrides `seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory; falls back to `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat an experiment for several values of N or M and write sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(SweepParam))]
        param: SweepParam,
        /// Comma-separated values, e.g. `3,4,5`.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the closed-form regret constants without simulating.
    Bounds {
        #[arg(long)]
        config: PathBuf,
    },
}

fn threads(requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn out_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> Result<PathBuf, BenchError> {
    flag.or_else(|| cfg.output_dir.clone()).ok_or_else(|| {
        BenchError::Runtime("no output directory: pass --out or set output_dir".into())
    })
}

fn print_bounds(path: &Path) -> Result<(), BenchError> {
    let cfg = load_config(path)?;
    let r = bound_report(&cfg.params()?, cfg.players)?;
    println!("centralized_constant {}", g9(r.centralized_constant));
    println!("tds_constant {}", g9(r.tds_constant));
    println!("upper_model1 {}", g9(r.upper_model1));
    println!("upper_model2 {}", g9(r.upper_model2));
    for (k, x) in r.x.iter().enumerate() {
        println!("x_{} {}", k + 1, g9(*x));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Run {
            config,
            trials,
            seed,
            threads: w,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            cfg.trials = trials.unwrap_or(cfg.trials);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let out = out_dir(out, &cfg)?;
            let report = run_experiment(&cfg, threads(w), &out)?;
            println!(
                "leading constant {} ± {} over {} trials; tds bound {}; wrote {}",
                g9(report.leading_constant),
                g9(report.leading_constant_stderr),
                report.trials,
                g9(report.bounds.tds_constant),
                out.display()
            );
        }
        Command::Sweep {
            config,
            param,
            values,
            threads: w,
            out,
        } => {
            let cfg = load_config(&config)?;
            let out = out_dir(out, &cfg)?;
            let rows = run_sweep(&cfg, param, &values, threads(w), &out)?;
            for r in &rows {
                println!(
                    "{} {} ± {}",
                    r.value,
                    g9(r.leading_constant_mean),
                    g9(r.stderr)
                );
            }
        }
        Command::Bounds { config } => print_bounds(&config)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
