//! `bboxer`: reproducible retrofitting experiments from the command line.
//!
//! Exit codes: 0 success, 1 runtime or validation failure, 2 usage error.

mod args;
mod bounds;
mod optimize;
mod output;
mod replay;
mod retrofit;
mod robustness;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "bboxer",
    version,
    about = "Comparison-based retrofitting with auditable traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Runs an optimizer on a synthetic objective.
    Optimize(optimize::OptimizeArgs),
    /// Retrofits a toy classifier on labelled data.
    Retrofit(retrofit::RetrofitArgs),
    /// Generalization budgets and overfitting risks.
    Bounds(bounds::BoundsArgs),
    /// Poisoning, privacy and extraction experiments.
    #[command(subcommand)]
    Robustness(robustness::RobustnessCommand),
    /// Rebuilds a final point from its trace and checks the stored hash.
    Replay(replay::ReplayArgs),
}

fn init_threads() -> anyhow::Result<()> {
    if let Some(n) = bboxer::retrofit::thread_cap() {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match &cli.command {
        Command::Optimize(a) => optimize::run(a),
        Command::Retrofit(a) => retrofit::run(a),
        Command::Bounds(a) => bounds::run(a),
        Command::Robustness(c) => robustness::run(c),
        Command::Replay(a) => replay::run(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
