//! `deblur`: synthetic problems, regularized deblurring, posterior sampling,
//! posterior means and chain diagnostics.

mod args;
mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use deblur_core::Error;

#[derive(Debug, Parser)]
#[command(
    name = "deblur",
    version,
    about = "Image deblurring by regularization and posterior sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a blurred, noisy synthetic image with known truth.
    Synth(commands::SynthArgs),
    /// Regularized deconvolution with the L-curve choice of lambda.
    DeblurReg(commands::DeblurRegArgs),
    /// Sample the hyperparameter posterior.
    Sample(commands::SampleArgs),
    /// Posterior mean image from a sampled lambda histogram.
    Mean(commands::MeanArgs),
    /// IACT, CCES and histograms for chain CSVs.
    Diagnose(commands::DiagnoseArgs),
}

/// 2 for bad input, 3 for numerical failure, 1 for anything else (I/O).
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<args::UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(
            Error::Singular(_)
            | Error::SpectralZeros { .. }
            | Error::NoCorner
            | Error::Convergence { .. }
            | Error::ModeSearch { .. }
            | Error::DegenerateSeries
            | Error::DegeneratePsf,
        ) => 3,
        Some(Error::Io(_)) => 1,
        Some(_) => 2,
        None if err.downcast_ref::<std::io::Error>().is_some() => 1,
        None => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::DeblurReg(a) => commands::deblur_reg(a),
        Command::Sample(a) => commands::sample(a),
        Command::Mean(a) => commands::mean(a),
        Command::Diagnose(a) => commands::diagnose(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
