//! `proxstair` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 solver did not
//! converge. `PROXSTAIR_THREADS` caps the worker pool.

mod bench;
mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::report::CliError;

#[derive(Parser, Debug)]
#[command(name = "proxstair", version, about = "Weighted-MAE prox evaluation, TV denoising and membrane solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a batch of prox instances from CSV and append a `y` column.
    ProxEval {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Sample the staircase map of one instance and list its plateaus.
    StairPlot {
        /// CSV holding exactly one instance in the prox-eval format.
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        xmin: f64,
        #[arg(long, allow_negative_numbers = true)]
        xmax: f64,
        #[arg(long, default_value_t = 401)]
        samples: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Anisotropic TV denoising of a PGM image.
    Denoise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol_inner: f64,
        #[arg(long, default_value_t = 300.0)]
        tol_outer: f64,
        #[arg(long, default_value_t = 10_000)]
        max_inner: usize,
        #[arg(long, default_value_t = 1_000)]
        max_outer: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Membrane with threshold forces on a structured mesh, solved by ADMM.
    Membrane {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Time the batched prox and one box-constrained QP solve.
    Bench {
        /// Number of prox instances per batch call.
        #[arg(long, default_value_t = 1 << 15)]
        pixels: usize,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long)]
        output: PathBuf,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("PROXSTAIR_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::input(format!("PROXSTAIR_THREADS must be a positive integer, got {value:?}")))?;
    // a pool that is already initialized keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::ProxEval { input, output } => commands::prox_eval(&input, &output),
        Command::StairPlot { instance, xmin, xmax, samples, output } => {
            commands::stair_plot(&instance, xmin, xmax, samples, &output)
        }
        Command::Denoise { input, output, beta, tol_inner, tol_outer, max_inner, max_outer, report } => {
            let params = proxstair::RofParams { beta, tol_inner, tol_outer, max_inner, max_outer, ..Default::default() };
            commands::denoise(&input, &output, &params, report.as_deref())
        }
        Command::Membrane { config, output, report } => commands::membrane(&config, &output, report.as_deref()),
        Command::Bench { pixels, repeats, output } => bench::run(pixels, repeats, &output),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("proxstair: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
