mod commands;
mod config;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::RunOptions;
use crate::error::CliError;

/// Matrix diversity and in-context learning experiments.
#[derive(Debug, Parser)]
#[command(name = "matdiv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo estimate of the trivial-centralizer probability over p and N.
    Diversity(Common),
    /// Evaluate closed-form probability bounds over parameter grids.
    Bounds(Common),
    /// Train the linear transformer and write a checkpoint.
    IclTrain(Common),
    /// Evaluate a checkpoint against prompt length on one or more test distributions.
    IclEval(Common),
    /// Write the deterministic part and sampled task matrices as text.
    Gen(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Existing output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Also write an SVG plot.
    #[arg(long)]
    svg: bool,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (Command::Diversity(common)
    | Command::Bounds(common)
    | Command::IclTrain(common)
    | Command::IclEval(common)
    | Command::Gen(common)) = &cli.command;
    if let Some(k) = common.threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let opts = RunOptions {
        out: common.out.clone(),
        seed: common.seed,
        svg: common.svg,
    };
    let path = &common.config;
    match &cli.command {
        Command::Diversity(_) => commands::diversity(&config::load(path)?, &opts),
        Command::Bounds(_) => commands::bounds(&config::load(path)?, &opts),
        Command::IclTrain(_) => commands::icl_train(&config::load(path)?, &opts),
        Command::IclEval(_) => {
            let dir = path.parent().map(PathBuf::from).unwrap_or_default();
            commands::icl_eval(&config::load(path)?, &dir, &opts)
        }
        Command::Gen(_) => commands::gen(&config::load(path)?, &opts),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("matdiv: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
