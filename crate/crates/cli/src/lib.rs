//! Command-line front end for the `sgbm_core` boosting library:
//! `train`, `eval`, `bench`, `incremental`, `distill`, and `gen-data`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data or I/O error,
//! 3 numeric failure (non-finite loss).

pub mod commands;
pub mod data;
mod error;
pub mod records;
pub mod runner;
pub mod settings;

use clap::{Parser, Subcommand};

pub use error::{CliError, CliResult};
pub use records::MetricsRecord;
pub use runner::Metric;
pub use settings::{Algo, DataFormat, RunConfig, Settings};

use commands::{BenchArgs, DistillArgs, EvalArgs, GenDataArgs, IncrementalArgs, TrainArgs};

#[derive(Parser, Debug)]
#[command(
    name = "sgbm",
    version,
    about = "Soft and hard gradient boosting experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model; write metrics.jsonl and checkpoint.json.
    Train(TrainArgs),
    /// Score a checkpoint on the train or test side of a dataset.
    Eval(EvalArgs),
    /// Time sGBM against hard GBM for several ensemble sizes.
    Bench(BenchArgs),
    /// Train on data revealed in chunks, evaluating after each.
    Incremental(IncrementalArgs),
    /// Distill teacher logits into a student ensemble.
    Distill(DistillArgs),
    /// Write a synthetic dataset as CSV.
    GenData(GenDataArgs),
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Train(args) => commands::train(args),
        Command::Eval(args) => commands::eval(args).map(drop),
        Command::Bench(args) => commands::bench(args).map(drop),
        Command::Incremental(args) => commands::incremental(args).map(drop),
        Command::Distill(args) => commands::distill(args).map(drop),
        Command::GenData(args) => commands::gen_data(args),
    }
}
