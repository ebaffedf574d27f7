use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "prcrf",
    version,
    about = "PRC random forests for imbalanced binary classification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print name, observation count, minority fraction and feature count.
    Inspect(InspectArgs),
    /// Train a PRC-RF (or, with --ae, an AE-PRC-RF) on every row of --data.
    Train(TrainArgs),
    /// Predict labels and vote fractions with a trained model.
    Predict(PredictArgs),
    /// Train the autoencoder filter and write the cleaned dataset.
    Filter(FilterArgs),
    /// Repeated paired train/test evaluation of the selected algorithms.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// File of `key = value` lines (keys are long flag names); flags given on
    /// the command line take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Increase diagnostic output on standard error.
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Delimited file with a header row.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,

    /// Name of the label column.
    #[arg(long)]
    pub target: String,

    /// Target value mapped to the positive class; `<=x`, `<x`, `>=x` and `>x`
    /// select numeric ranges instead.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub positive_label: String,

    /// Field delimiter (single byte).
    #[arg(long, default_value = ",")]
    pub delimiter: char,

    /// Comma-separated columns to ignore (identifiers, timestamps).
    #[arg(long, value_delimiter = ',', value_name = "COLUMNS")]
    pub drop_columns: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ForestArgs {
    #[arg(long, default_value_t = 100)]
    pub n_trees: usize,

    /// Root depth is 1; a node splits only while its depth is below this.
    #[arg(long, default_value_t = 10)]
    pub max_depth: usize,

    #[arg(long, default_value_t = 5)]
    pub min_leaf: usize,

    /// Features sampled per split [default: floor(sqrt(number of features))].
    #[arg(long)]
    pub n_features: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Population {
    All,
    Majority,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Args)]
pub struct AeArgs {
    /// Encoder widths, input first, non-increasing
    /// [default: p, ceil(p/2), ceil(p/4) for p features].
    #[arg(long, value_delimiter = ',', value_name = "WIDTHS")]
    pub ae_widths: Vec<usize>,

    #[arg(long, default_value_t = 100)]
    pub ae_epochs: usize,

    #[arg(long, default_value_t = 1e-3)]
    pub ae_lr: f64,

    #[arg(long, default_value_t = 32)]
    pub ae_batch: usize,

    /// Training-error quantile above which rows are removed.
    #[arg(long, default_value_t = 0.95)]
    pub ae_quantile: f64,

    /// Rows the autoencoder is trained on.
    #[arg(long, value_enum, default_value_t = Population::Majority)]
    pub ae_population: Population,

    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub ae_optimizer: OptimizerArg,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Master seed; every random stream is derived from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads, 0 for all cores. Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub forest: ForestArgs,

    /// Filter the training rows with an autoencoder first.
    #[arg(long)]
    pub ae: bool,
    #[command(flatten)]
    pub autoencoder: AeArgs,
    #[command(flatten)]
    pub run: RunArgs,

    /// Model file to write.
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model written by `train`.
    #[arg(long, default_value = "model.json")]
    pub model: PathBuf,

    /// Delimited feature file with a header row; columns must match the model.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,

    /// Label column to ignore if present.
    #[arg(long)]
    pub target: Option<String>,

    #[arg(long, default_value = ",")]
    pub delimiter: char,

    /// Comma-separated columns to ignore.
    #[arg(long, value_delimiter = ',', value_name = "COLUMNS")]
    pub drop_columns: Vec<String>,

    /// Output file: one `prediction,vote_fraction` record per row.
    #[arg(long, default_value = "predictions.csv")]
    pub out: PathBuf,

    /// Worker threads, 0 for all cores.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub autoencoder: AeArgs,
    #[command(flatten)]
    pub run: RunArgs,

    /// Cleaned dataset; removed row indices (0-based) go to
    /// `<out stem>.flagged.txt` next to it.
    #[arg(long, default_value = "filtered.csv")]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub forest: ForestArgs,
    #[command(flatten)]
    pub autoencoder: AeArgs,
    #[command(flatten)]
    pub run: RunArgs,

    /// Fraction of each class held out for testing.
    #[arg(long, default_value_t = 0.3)]
    pub test_fraction: f64,

    /// Draw the test set without stratifying by class.
    #[arg(long)]
    pub unstratified: bool,

    #[arg(long, default_value_t = 100)]
    pub repetitions: usize,

    /// Comma-separated algorithm tags.
    #[arg(long, value_delimiter = ',', default_value = "prc-rf,ae-prc-rf")]
    pub algorithms: Vec<String>,

    /// Output prefix: writes `<out>.txt` (table) and `<out>.csv` (records).
    #[arg(long, default_value = "benchmark")]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}
