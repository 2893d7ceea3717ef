//! `iss-sparse`: sparse-recovery solution paths from the command line.
//!
//! Subcommands: `gen-data` (synthetic instances), `solve` (ISS / LB / LBISS /
//! LASSO paths as plot-ready CSV), `diagnose` (condition numbers and stopping
//! times), `experiment` (the mean-AUC study), and `stop-run` (early-stopped
//! model selection). Every command writes a `manifest.json` that reproduces
//! the outputs byte for byte.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 stopping rule never fired.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Iss,
    Lb,
    Lbiss,
    Lasso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    Residual,
    Gradient,
}

#[derive(Parser)]
#[command(name = "iss-sparse", version, about = "Sparse recovery via inverse-scale-space and linearized Bregman solution paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance (X.csv, y.csv, truth.json).
    GenData {
        /// JSON config (schema_version, n, p, s, sigma, covariance, seed).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute one solution path and write it as long-format CSV.
    Solve {
        #[arg(long)]
        method: Method,
        /// Design matrix CSV.
        x: PathBuf,
        /// Response CSV.
        y: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Damping parameter for lb / lbiss (default 64).
        #[arg(long)]
        kappa: Option<f64>,
        /// Step size for lb (default 0.1 / kappa).
        #[arg(long)]
        alpha: Option<f64>,
        /// Time horizon (ISS default: run to termination; LB/LBISS default 10;
        /// LASSO: grid extends down to lambda = 1/t_max).
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Evaluate the design conditions, coherence, and stopping quantities.
    Diagnose {
        x: PathBuf,
        y: PathBuf,
        /// Optional truth.json providing support and sigma.
        truth: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Support guess as comma-separated indices (overrides truth).
        #[arg(long)]
        support: Option<String>,
        /// Noise level (overrides truth).
        #[arg(long)]
        sigma: Option<f64>,
        /// Damping parameter: also report the magnitude bound B and the
        /// corrected stopping time.
        #[arg(long)]
        kappa: Option<f64>,
    },
    /// Run the mean-AUC study (rows.csv, table.csv, summary.json).
    Experiment {
        /// JSON config; the benchmark defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a path, stopping at the first point satisfying a rule.
    StopRun {
        #[arg(long)]
        method: Method,
        x: PathBuf,
        y: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        rule: Rule,
        /// Noise level feeding the rule threshold.
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
}

/// An error carrying its process exit code.
pub struct AppError {
    pub code: u8,
    pub source: anyhow::Error,
}

pub type AppResult<T> = Result<T, AppError>;

pub fn config_error<E: Into<anyhow::Error>>(e: E) -> AppError {
    AppError {
        code: 2,
        source: e.into(),
    }
}

pub fn numerical_error<E: Into<anyhow::Error>>(e: E) -> AppError {
    AppError {
        code: 3,
        source: e.into(),
    }
}

/// Maps core errors: invalid inputs are configuration problems, everything
/// else is a numerical failure.
pub fn core_error(e: iss_core::Error) -> AppError {
    match &e {
        iss_core::Error::InvalidInput(_) | iss_core::Error::ShardPlan(_) => config_error(e),
        _ => numerical_error(e),
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("ISS_SPARSE_THREADS") {
        if let Ok(threads) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let outcome = match cli.command {
        Command::GenData {
            config,
            out_dir,
            seed,
        } => commands::gen_data::run(&config, &out_dir, seed, &argv),
        Command::Solve {
            method,
            x,
            y,
            out_dir,
            kappa,
            alpha,
            t_max,
            max_iters,
        } => commands::solve::run(
            method,
            &x,
            &y,
            &out_dir,
            commands::solve::SolveOpts {
                kappa,
                alpha,
                t_max,
                max_iters,
            },
            &argv,
        ),
        Command::Diagnose {
            x,
            y,
            truth,
            out_dir,
            support,
            sigma,
            kappa,
        } => commands::diagnose::run(
            &x,
            &y,
            truth.as_deref(),
            &out_dir,
            support.as_deref(),
            sigma,
            kappa,
            &argv,
        ),
        Command::Experiment {
            config,
            out_dir,
            seed,
        } => commands::experiment::run(config.as_deref(), &out_dir, seed, &argv),
        Command::StopRun {
            method,
            x,
            y,
            out_dir,
            rule,
            sigma,
            kappa,
            alpha,
            t_max,
            max_iters,
        } => commands::stop_run::run(
            method,
            &x,
            &y,
            &out_dir,
            rule,
            sigma,
            commands::solve::SolveOpts {
                kappa,
                alpha,
                t_max,
                max_iters,
            },
            &argv,
        ),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError { code, source }) => {
            eprintln!("error: {source:#}");
            ExitCode::from(code)
        }
    }
}
