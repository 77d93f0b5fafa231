//! Command-line pipeline for conflict-event fatality classification:
//! split a raw events CSV, train the classifier, evaluate, predict, and
//! run corpus analytics.

mod analyze;
mod data;
mod error;
mod eval;
mod predict;
mod settings;
mod split;
mod train;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "fatality",
    version,
    about = "Conflict-event fatality classification pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a raw events CSV into train/validation/test files
    Split(SplitArgs),
    /// Train the classifier on split files
    Train(TrainArgs),
    /// Evaluate saved weights on a labeled CSV
    Eval(EvalArgs),
    /// Score texts with saved weights
    Predict(PredictArgs),
    /// Corpus length statistics and word-frequency tables
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct SplitArgs {
    /// Config file with key = value lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Raw events CSV
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use the 3826/426/500 split sizes
    #[arg(long)]
    paper_split: bool,
    /// Explicit split sizes
    #[arg(long, value_name = "TRAIN,VAL,TEST")]
    counts: Option<String>,
    /// Split proportions, converted to sizes by largest remainder
    #[arg(long, value_name = "TRAIN,VAL,TEST")]
    ratios: Option<String>,
    /// Balance the label mix across splits (default)
    #[arg(long, overrides_with = "no_stratified")]
    stratified: bool,
    /// Plain shuffled split without label balancing
    #[arg(long, overrides_with = "stratified")]
    no_stratified: bool,
    /// Header name of the event-text column
    #[arg(long)]
    notes_column: Option<String>,
    /// Header name of the fatality-count column
    #[arg(long)]
    fatalities_column: Option<String>,
}

impl SplitArgs {
    fn stratified_flag(&self) -> Option<bool> {
        if self.stratified {
            Some(true)
        } else if self.no_stratified {
            Some(false)
        } else {
            None
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Config file with key = value lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding train.csv and validation.csv
    #[arg(long)]
    data: Option<PathBuf>,
    /// Vocabulary file, one token per line
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Peak learning rate
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Fraction of total steps spent in linear warmup
    #[arg(long)]
    warmup_fraction: Option<f64>,
    /// Dropout on the pooled vector before the classifier
    #[arg(long)]
    dropout: Option<f64>,
    /// Update only the pooler and classifier
    #[arg(long)]
    freeze_encoder: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Config file with key = value lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Labeled CSV with text and label columns
    #[arg(long)]
    data: Option<PathBuf>,
    /// Vocabulary file, one token per line
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Weight file written by the train command
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Positive-label cutoff on the probability
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct PredictArgs {
    /// Texts to score; use --data for a file instead
    #[arg(value_name = "TEXT")]
    texts: Vec<String>,
    /// Config file with key = value lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// File of texts, one per line
    #[arg(long)]
    data: Option<PathBuf>,
    /// Vocabulary file, one token per line
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Weight file written by the train command
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Output directory for the run record
    #[arg(long)]
    out: Option<PathBuf>,
    /// Positive-label cutoff on the probability
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Config file with key = value lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Raw events CSV
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table size for the top-word lists
    #[arg(long)]
    k: Option<usize>,
    /// Stopword file overriding the built-in English list
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Header name of the event-text column
    #[arg(long)]
    notes_column: Option<String>,
    /// Header name of the fatality-count column
    #[arg(long)]
    fatalities_column: Option<String>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Split(args) => split::run(args),
        Command::Train(args) => train::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Predict(args) => predict::run(args),
        Command::Analyze(args) => analyze::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
