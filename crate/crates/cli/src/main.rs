//! `squeeze`: writes the data behind each squeezing study as CSV and JSON
//! files, with a manifest per run.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use squeeze_core::optimize::DEFAULT_SEED;
use squeeze_core::Execution;

#[derive(Parser, Debug)]
#[command(name = "squeeze", version, about = "Few-pulse spin squeezing studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Squeezing over a (theta2, T2) grid at fixed T1.
    Landscape(commands::LandscapeArgs),
    /// Optimal squeezing versus particle number, with power-law fits.
    Scaling(commands::ScalingArgs),
    /// Squeezing versus time for OAT and optimized protocols.
    Trajectory(commands::TrajectoryArgs),
    /// Squeezing versus total duration under a duration penalty.
    Pareto(commands::ParetoArgs),
    /// Monte Carlo envelope under relative control errors.
    Noise(commands::NoiseArgs),
    /// Entanglement depth certified along OAT and optimized trajectories.
    Depth(commands::DepthArgs),
    /// Multi-start protocol optimization.
    Optimize(commands::OptimizeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Directory for data files and the run manifest.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Run every task on the calling thread.
    #[arg(long)]
    pub sequential: bool,
}

impl Common {
    pub fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct Search {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Random starts of the multi-start search (default depends on --steps).
    #[arg(long)]
    pub starts: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Landscape(a) => commands::landscape(&a),
        Command::Scaling(a) => commands::scaling(&a),
        Command::Trajectory(a) => commands::trajectory(&a),
        Command::Pareto(a) => commands::pareto(&a),
        Command::Noise(a) => commands::noise(&a),
        Command::Depth(a) => commands::depth(&a),
        Command::Optimize(a) => commands::optimize(&a),
    };
    match result {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
