//! `frailtree`: fit, compare and simulate covariate-adjusted frailty models.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 data
//! error, 4 sampler divergence, 5 data digest mismatch between runs.

mod compare;
mod config;
mod curves;
mod error;
mod fit;
mod manifest;
mod simulate;
mod summarize;

use clap::{Parser, Subcommand};
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "frailtree", version, about = "Bayesian frailty PH models with covariate-dependent tailfree frailties")]
struct Cli {
    /// Log verbosity: error, warn, info, debug or trace (overridden by RUST_LOG).
    #[arg(long, global = true, default_value = "info", value_name = "LEVEL")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one frailty model and write chains, a posterior summary and LPML/DIC.
    Fit(fit::FitArgs),
    /// Tabulate LPML/DIC and pseudo Bayes factors of fitted runs on the same data.
    Compare(compare::CompareArgs),
    /// Run a replicated simulation study.
    Simulate(simulate::SimulateArgs),
    /// Write predictive survival and frailty-density curves for covariate profiles.
    Curves(curves::CurvesArgs),
    /// Describe an input data set.
    Summarize(summarize::SummarizeArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(&cli.log))
        .format_timestamp(None)
        .init();
    let outcome = match &cli.command {
        Command::Fit(args) => fit::run(args).map(drop),
        Command::Compare(args) => compare::run(args).map(drop),
        Command::Simulate(args) => simulate::run(args).map(drop),
        Command::Curves(args) => curves::run(args).map(drop),
        Command::Summarize(args) => summarize::run(args).map(drop),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
