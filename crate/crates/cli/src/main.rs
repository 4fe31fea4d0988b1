//! `vista`: generate demonstrations, augment them with novel views, train
//! k-NN policies and evaluate them under camera viewpoint shifts.
//!
//! Exit codes: 0 on success, 2 for invalid configuration, 3 for I/O and
//! input-file errors.

mod chart;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::config::CliError;

#[derive(Debug, Parser)]
#[command(name = "vista", version, about = "Viewpoint augmentation for imitation learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Record scripted demonstrations from the fixed camera.
    GenDemos(commands::GenDemosArgs),
    /// Re-render every frame from sampled viewpoints, with rejection and fallback.
    Augment(commands::AugmentArgs),
    /// Fit a k-NN policy on a dataset.
    Train(commands::TrainArgs),
    /// Roll out a policy under a test viewpoint distribution.
    Eval(commands::EvalArgs),
    /// Evaluate several policies under several distributions and tabulate.
    Compare(commands::CompareArgs),
    /// Synthesize one novel view of a dataset frame (debugging aid).
    Render(commands::RenderArgs),
    /// Print the perceptual distance between two PNG images.
    Metric(commands::MetricArgs),
}

/// Shared flag: the optional JSON pipeline config.
#[derive(Debug, Clone, clap::Args)]
pub struct ConfigArg {
    /// JSON pipeline config; flags given on the command line take precedence
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

fn run(matches: &ArgMatches) -> Result<(), CliError> {
    let cli = Cli::from_arg_matches(matches).map_err(|e| CliError::Config(e.to_string()))?;
    let (_, sub) = matches.subcommand().expect("subcommand is required");
    match cli.command {
        Command::GenDemos(a) => commands::gen_demos(&a, sub),
        Command::Augment(a) => commands::augment(&a, sub),
        Command::Train(a) => commands::train(&a, sub),
        Command::Eval(a) => commands::eval(&a, sub),
        Command::Compare(a) => commands::compare(&a),
        Command::Render(a) => commands::render(&a),
        Command::Metric(a) => commands::metric(&a),
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
