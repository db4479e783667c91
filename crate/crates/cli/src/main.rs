//! `bwht`: transforms, noise sweeps, early-termination studies and training
//! for the bitplane Walsh-Hadamard simulator. Every command writes CSV to
//! `--out` or stdout.
//!
//! Exit codes: 0 success, 2 usage or config error, 1 internal error.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Common, EarlytermArgs, SweepArgs, TrainArgs, TransformArgs};
use config::ExperimentConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "bwht", version, about = "Bitplane Walsh-Hadamard transform simulator")]
struct Cli {
    /// TOML experiment config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output CSV path (stdout if omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Blockwise transform of a vector file.
    Transform(TransformArgs),
    /// Comparator failure rate over a sigma_ant x safety-margin grid.
    SweepAnt(SweepArgs),
    /// Cycle histogram of early-terminated 1-bit transforms.
    Earlyterm(EarlytermArgs),
    /// Train a one-layer network on a synthetic task.
    Train(TrainArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    // A section's own seed beats the top-level one; the flag beats both.
    cfg.transform.seed = cfg.transform.seed.or(cfg.seed);
    cfg.sweep_ant.seed = cfg.sweep_ant.seed.or(cfg.seed);
    cfg.earlyterm.seed = cfg.earlyterm.seed.or(cfg.seed);
    cfg.train.seed = cfg.train.seed.or(cfg.seed);
    let common = Common {
        seed: cli.seed,
        out: cli.out,
    };
    match cli.command {
        Command::Transform(a) => commands::transform(a, cfg.transform, common),
        Command::SweepAnt(a) => commands::sweep_ant(a, cfg.sweep_ant, common),
        Command::Earlyterm(a) => commands::earlyterm(a, cfg.earlyterm, common),
        Command::Train(a) => commands::train_cmd(a, cfg.train, common),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bwht: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
