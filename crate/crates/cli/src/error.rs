//! One error type for the whole binary, mapped to process exit codes:
//! 2 for input and validation problems, 3 for numerical failure.

use std::path::PathBuf;

use fatality_core::analytics::AnalyticsError;
use fatality_core::corpus::SplitError;
use fatality_core::metrics::MetricsError;
use fatality_core::model::serialize::WeightFormatError;
use fatality_core::model::ModelError;
use fatality_core::tokenizer::VocabError;
use fatality_core::training::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}, line {line}: {reason}", path.display())]
    ConfigFile {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("invalid value for {key}: {reason}")]
    BadValue { key: String, reason: String },
    #[error("{}: {message}", path.display())]
    Csv { path: PathBuf, message: String },
    /// Prerendered multi-line report naming every rejected row.
    #[error("{message}")]
    InvalidRows { message: String },
    #[error("--{flag} is required (flag or config key)")]
    MissingPath { flag: &'static str },
    #[error("choose only one of --paper-split, --counts, --ratios")]
    SplitModeConflict,
    #[error("a split needs --paper-split, --counts, or --ratios (flag or config key)")]
    SplitModeMissing,
    #[error("give either positional text or --data, not both")]
    PredictInputConflict,
    #[error("nothing to predict: give text or --data")]
    PredictInputMissing,
    #[error("vocabulary has {vocab} tokens but the weight file embeds {weights}")]
    VocabSizeMismatch { vocab: usize, weights: usize },
    #[error("{}: {source}", path.display())]
    BadVocab {
        path: PathBuf,
        #[source]
        source: VocabError,
    },
    #[error("{}: {source}", path.display())]
    BadWeights {
        path: PathBuf,
        #[source]
        source: WeightFormatError,
    },
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Train(TrainError::NonFiniteLoss { .. }) => 3,
            _ => 2,
        }
    }
}
