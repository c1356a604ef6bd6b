//! `gmpl` — matrix-completion runs from the command line.
//!
//! Subcommands: `split` (partition a rating-triple file), `train` (one run
//! of gmpso/pso/sgd on a split), `evaluate` (RMSE and point predictions from
//! a saved model), `benchmark` (dataset x algorithm x seed cross product
//! with an aggregate table).

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use gmpl_core::data::Delimiter;
use gmpl_core::trainer::Algorithm;

use config::TrainOpts;

#[derive(Parser)]
#[command(name = "gmpl", version, about = "latent factor analysis with swarm-adapted SGD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a rating-triple file into train/validation/test
    Split(SplitArgs),
    /// Train one model on a prepared split
    Train(TrainArgs),
    /// Evaluate a saved model against a split partition
    Evaluate(EvaluateArgs),
    /// Run the dataset x algorithm x seed cross product
    Benchmark(BenchmarkArgs),
}

#[derive(clap::Args)]
struct SplitArgs {
    /// Rating-triple file ("user item rating" per line)
    #[arg(long)]
    data: PathBuf,

    /// train,validation,test fractions (must sum to 1)
    #[arg(long, default_value = "0.7,0.1,0.2")]
    ratios: String,

    /// Shuffle seed
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Field delimiter: auto, whitespace, comma, or double-colon
    #[arg(long, default_value = "auto")]
    delimiter: Delimiter,

    /// Output directory for the three partitions plus manifest
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct TrainArgs {
    /// Directory produced by `gmpl split`
    #[arg(long)]
    split_dir: PathBuf,

    /// sgd, pso, or gmpso
    #[arg(long, default_value = "gmpso")]
    algorithm: Algorithm,

    /// RNG seed for this run
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Tune plain SGD over the log-2 grid instead of fixed eta/lambda
    #[arg(long)]
    grid: bool,

    /// Output directory (default: $GMPL_OUT_DIR, else current directory)
    #[arg(long)]
    out: Option<PathBuf>,

    #[command(flatten)]
    opts: TrainOpts,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Partition {
    Train,
    Validation,
    Test,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    /// Directory produced by `gmpl split`
    #[arg(long)]
    split_dir: PathBuf,

    /// Model file written by `gmpl train`
    #[arg(long)]
    model: PathBuf,

    /// Partition to score
    #[arg(long, value_enum, default_value_t = Partition::Test)]
    partition: Partition,

    /// Optional file of "user item" pairs to predict
    #[arg(long)]
    pairs: Option<PathBuf>,
}

#[derive(clap::Args)]
struct BenchmarkArgs {
    /// Split directory; repeat for several datasets
    #[arg(long = "split-dir", required = true)]
    split_dirs: Vec<PathBuf>,

    /// Algorithms to run
    #[arg(long = "algorithms", value_delimiter = ',', required = true)]
    algorithms: Vec<Algorithm>,

    /// Seeds to run
    #[arg(long = "seeds", value_delimiter = ',', required = true)]
    seeds: Vec<u64>,

    /// Tune plain SGD over the log-2 grid (the usual baseline protocol)
    #[arg(long)]
    grid: bool,

    /// Output directory (default: $GMPL_OUT_DIR, else current directory)
    #[arg(long)]
    out: Option<PathBuf>,

    #[command(flatten)]
    opts: TrainOpts,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(), // clap reports usage errors with code 2
    };
    let result = match cli.command {
        Command::Split(args) => commands::cmd_split(args),
        Command::Train(args) => commands::cmd_train(args),
        Command::Evaluate(args) => commands::cmd_evaluate(args),
        Command::Benchmark(args) => commands::cmd_benchmark(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}
