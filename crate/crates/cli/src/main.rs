//! `mts-select`: rank, select and evaluate sensors of a labeled
//! multivariate time-series dataset.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "mts-select", version, about = "Sensor ranking and selection for multivariate time series")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Root seed for every random stage
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (defaults to the number of CPUs)
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,

    /// Directory for cached distance matrices
    #[arg(long, global = true, env = "MTS_SELECT_CACHE", default_value = "cache")]
    pub cache_dir: PathBuf,

    /// Compute distances without reading or writing the cache
    #[arg(long, global = true)]
    pub no_cache: bool,

    /// Sakoe-Chiba band half-width for DTW (unconstrained when absent)
    #[arg(long, global = true)]
    pub dtw_window: Option<usize>,

    /// Z-normalize every series before DTW
    #[arg(long, global = true)]
    pub znorm: bool,

    /// Re-split the dataset: stratified fraction of each class used for training
    #[arg(long, global = true)]
    pub train_fraction: Option<f64>,

    /// Neighbors per segment in the similarity graphs
    #[arg(long, global = true, default_value_t = 10)]
    pub knn: usize,

    /// More log output on standard error (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    #[serde(skip)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Score every feature and write scores.csv
    Rank(RankArgs),
    /// Select a sparse, low-redundancy feature subset and write alpha.csv
    Select(SelectArgs),
    /// 1-NN accuracy of a feature subset on the test segments
    Eval(EvalArgs),
    /// Write a planted synthetic dataset
    GenSynthetic(GenArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct RankArgs {
    /// Dataset directory
    #[arg(long)]
    pub data: PathBuf,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    Mi,
    Cmi,
}

#[derive(Debug, Args, Serialize)]
#[command(group = clap::ArgGroup::new("sparsity").required(true).args(["lambda", "target_size"]))]
pub struct SelectArgs {
    #[arg(long)]
    pub data: PathBuf,

    #[arg(long)]
    pub out: PathBuf,

    /// l1 penalty weight
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Search lambda for this many selected features
    #[arg(long)]
    pub target_size: Option<usize>,

    /// Redundancy penalty weight
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,

    #[arg(long, value_enum, default_value_t = Penalty::Cmi)]
    pub penalty: Penalty,

    /// Landmark count for the Nystrom redundancy approximation
    /// (used automatically above 512 features)
    #[arg(long, conflicts_with = "no_nystrom")]
    pub nystrom: Option<usize>,

    /// Always compute the exact redundancy matrix
    #[arg(long)]
    pub no_nystrom: bool,

    /// Also write the shifted redundancy matrix to redundancy.csv
    #[arg(long)]
    pub dump_redundancy: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Sum of per-feature distance matrices
    Distances,
    /// Sum of (1 - similarity) graph complements
    Graphs,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,

    /// results.json path, or a directory to write it into
    #[arg(long)]
    pub out: PathBuf,

    /// alpha.csv or scores.csv; all features when absent
    #[arg(long)]
    pub subset: Option<PathBuf>,

    /// Keep the K best features of the subset file
    #[arg(long)]
    pub top: Option<usize>,

    /// Weight each feature by its alpha (alpha.csv subsets only)
    #[arg(long)]
    pub weighted: bool,

    #[arg(long, value_enum, default_value_t = Aggregation::Distances)]
    pub aggregate: Aggregation,
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    /// Output dataset directory
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, default_value_t = 60)]
    pub n: usize,

    #[arg(long, default_value_t = 3)]
    pub classes: usize,

    #[arg(long, default_value_t = 5)]
    pub informative: usize,

    #[arg(long, default_value_t = 15)]
    pub noise: usize,

    /// Append an exact copy of this feature id (repeatable)
    #[arg(long)]
    pub duplicate: Vec<usize>,

    #[arg(long, default_value_t = 30)]
    pub min_len: usize,

    #[arg(long, default_value_t = 50)]
    pub max_len: usize,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    init_logging(cli.common.verbose);
    if let Some(t) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t as usize).build_global() {
            eprintln!("error: cannot start {t} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_internal() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
