//! Argument parsing and dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, Common};
use crate::error::Result;
use crate::report::Format;

#[derive(Debug, Parser)]
#[command(name = "fatra", version, about = "Graph fairness under distribution shift")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Args)]
pub struct CommonArgs {
    /// Experiment config (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Run a single seed instead of the config's seed list.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

impl From<CommonArgs> for Common {
    fn from(a: CommonArgs) -> Self {
        Common { config: a.config, seed: a.seed, out: a.out, format: a.format }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on the config's training graph; write run records, checkpoints and test metrics.
    Train(CommonArgs),
    /// Evaluate a checkpoint on the config's testing graphs.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
    },
    /// Write a training graph and a suite of structure-shifted testing graphs.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        /// Target mean signed balances as `a:b:step`.
        #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
        targets: Option<Targets>,
    },
    /// Check the fairness bounds on synthetic instances; write certificates.
    TheoryCheck(CommonArgs),
    /// Full model and the four single-component ablations over the seed list.
    Ablate(CommonArgs),
    /// Train over the config's hyperparameter grid; write (ΔEO, ACC) per point.
    Sweep(CommonArgs),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Targets(pub Vec<f64>);

fn parse_grid(s: &str) -> std::result::Result<Targets, String> {
    commands::parse_targets(s).map(Targets)
}

pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Train(c) => commands::train(&c.into()),
        Command::Eval { common, checkpoint } => commands::eval(&common.into(), &checkpoint),
        Command::Synth { common, targets } => commands::synth(&common.into(), targets.map(|t| t.0)),
        Command::TheoryCheck(c) => commands::theory_check(&c.into()),
        Command::Ablate(c) => commands::ablate(&c.into()),
        Command::Sweep(c) => commands::sweep(&c.into()),
    }
}
