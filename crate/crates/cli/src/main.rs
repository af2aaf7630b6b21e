use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dyncopy_cli::config::{self, ExperimentKind};
use dyncopy_cli::experiments;

/// Train learning machines to copy the dynamics of black-box systems and
/// analyze what the copies do.
#[derive(Parser)]
#[command(name = "dyncopy", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Copy a trained classifier network from random input-output probes.
    CopyClassifier(RunArgs),
    /// Copy the Lorenz flow from sampled input-output responses.
    CopyLorenzDlm(RunArgs),
    /// Copy the Lorenz flow from a scalar record via a delay machine.
    CopyLorenzDdlm(RunArgs),
    /// Replay the black system's parameter history as a bifurcation
    /// diagram over training time.
    HistoryReplay(RunArgs),
    /// Copy a recorded scalar series (light curve) with a delay machine.
    CopySeries(RunArgs),
}

impl Command {
    fn split(self) -> (ExperimentKind, RunArgs) {
        match self {
            Command::CopyClassifier(a) => (ExperimentKind::CopyClassifier, a),
            Command::CopyLorenzDlm(a) => (ExperimentKind::CopyLorenzDlm, a),
            Command::CopyLorenzDdlm(a) => (ExperimentKind::CopyLorenzDdlm, a),
            Command::HistoryReplay(a) => (ExperimentKind::HistoryReplay, a),
            Command::CopySeries(a) => (ExperimentKind::CopySeries, a),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();
    let config = match config::load(&args.config, kind, args.seed, args.out_dir) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("dyncopy: {err}");
            return ExitCode::FAILURE;
        }
    };
    match experiments::run(&config) {
        Ok(summary) => {
            if let Some(dir) = config.out_dir().to_str() {
                println!("outputs written to {dir}");
            }
            let _ = summary;
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("dyncopy: {err}");
            ExitCode::FAILURE
        }
    }
}
