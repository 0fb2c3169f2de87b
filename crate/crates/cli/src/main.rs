use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

mod config;
mod error;
mod eval_cmd;
mod gen_cmd;
mod manifest;
mod plot_cmd;
mod train_cmd;

use derender_core::exec::{self, Parallelism};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "derender", version, about = "Scene-program datasets, toy decoders and metrics")]
pub struct Cli {
    /// Seed for generation and training.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads (0 = all cores, 1 = sequential).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// JSON file overriding default configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a dataset split.
    Gen(gen_cmd::GenArgs),
    /// Train a char- or float-mode decoder.
    Train(train_cmd::TrainArgs),
    /// Score predictions (from a JSONL file or a checkpoint) against ground truth.
    Eval(eval_cmd::EvalArgs),
    /// Render an SVG plot with a CSV sidecar.
    Plot(plot_cmd::PlotArgs),
}

pub struct Ctx {
    pub seed: u64,
    pub threads: usize,
    pub par: Parallelism,
    pub config: config::RunConfig,
    pub argv: Vec<String>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = config::RunConfig::load(cli.config.as_deref())?;
    let ctx = Ctx {
        seed: cli.seed,
        threads: cli.threads,
        par: if cli.threads == 1 {
            Parallelism::Sequential
        } else {
            Parallelism::Rayon
        },
        config,
        argv: std::env::args().collect(),
    };
    exec::with_threads(cli.threads, || match &cli.command {
        Command::Gen(a) => gen_cmd::run(&ctx, a),
        Command::Train(a) => train_cmd::run(&ctx, a),
        Command::Eval(a) => eval_cmd::run(&ctx, a),
        Command::Plot(a) => plot_cmd::run(&ctx, a),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.source);
            ExitCode::from(e.code())
        }
    }
}
