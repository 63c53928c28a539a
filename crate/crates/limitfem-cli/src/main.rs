use std::process::ExitCode;

mod config;
mod runner;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "limitfem", about = "Strain-limiting thermoelasticity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Configuration file (line-oriented key = value)
    #[arg(long)]
    config: Option<std::path::PathBuf>,
    /// Domain: example1 (square) or example2 (square with slit)
    #[arg(long)]
    domain: Option<String>,
    /// Temperature boundary case: 1 or 2
    #[arg(long)]
    case: Option<u32>,
    /// Constitutive model: linear or nonlinear
    #[arg(long)]
    model: Option<String>,
    /// Global mesh refinements
    #[arg(long)]
    refinements: Option<u32>,
    /// Strain-limiting scale beta
    #[arg(long)]
    beta: Option<f64>,
    /// Strain-limiting exponent a
    #[arg(long)]
    a: Option<f64>,
    /// Newton residual tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Newton iteration cap
    #[arg(long)]
    max_iter: Option<usize>,
    /// Output directory (falls back to $LIMITFEM_OUTDIR, then "out")
    #[arg(long)]
    outdir: Option<std::path::PathBuf>,
    /// Concurrent experiments in a sweep
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and export its fields
    Run(Overrides),
    /// Manufactured-solution h-convergence study
    Mms {
        /// Number of refinement cycles
        #[arg(long, default_value_t = 6)]
        cycles: usize,
        #[arg(long)]
        outdir: Option<std::path::PathBuf>,
    },
    /// Run the full 2 domains x 2 cases x 2 models grid
    Sweep(Overrides),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(over) => config::RunConfig::from_sources(&over).and_then(runner::run_one),
        Command::Mms { cycles, outdir } => runner::run_mms(cycles, outdir),
        Command::Sweep(over) => config::RunConfig::from_sources(&over).and_then(runner::run_sweep),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
