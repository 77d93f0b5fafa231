//! Effective run configuration: built-in defaults, overridden by a
//! `key = value` config file, overridden again by command-line flags.
//! Every command dumps the resolved settings to its output directory so a
//! run can be replayed from the recorded file alone.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fatality_core::model::ModelConfig;
use fatality_core::training::TrainConfig;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub data: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub out: PathBuf,
    pub notes_column: String,
    pub fatalities_column: String,
    pub counts: Option<(usize, usize, usize)>,
    pub ratios: Option<(f64, f64, f64)>,
    pub paper_split: bool,
    pub stratified: bool,
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub max_positions: usize,
    pub max_seq: usize,
    /// Dropout on the pooled vector before the classifier.
    pub dropout: f64,
    pub encoder_dropout: f64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub warmup_fraction: f64,
    pub weight_decay: f64,
    pub grad_clip_norm: Option<f64>,
    pub freeze_encoder: bool,
    pub seed: u64,
    pub threshold: f64,
    pub k: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            data: None,
            vocab: None,
            weights: None,
            stopwords: None,
            out: PathBuf::from("out"),
            notes_column: "notes".into(),
            fatalities_column: "fatalities".into(),
            counts: None,
            ratios: None,
            paper_split: false,
            stratified: true,
            layers: 4,
            hidden: 512,
            heads: 8,
            ffn_dim: 2048,
            max_positions: 512,
            max_seq: 128,
            dropout: 0.3,
            encoder_dropout: 0.1,
            epochs: 10,
            lr: 3e-5,
            batch_size: 32,
            warmup_fraction: 0.10,
            weight_decay: 0.01,
            grad_clip_norm: Some(1.0),
            freeze_encoder: false,
            seed: 42,
            threshold: 0.5,
            k: 10,
        }
    }
}

impl Settings {
    /// Defaults plus the config file, when one was given.
    pub fn load(config: Option<&Path>) -> Result<Self, CliError> {
        let mut settings = Self::default();
        if let Some(path) = config {
            settings.apply_file(path)?;
        }
        Ok(settings)
    }

    fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = crate::data::read_file(path)?;
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(CliError::ConfigFile {
                    path: path.to_path_buf(),
                    line,
                    reason: "expected key = value".into(),
                });
            };
            self.set(key.trim(), value.trim())
                .map_err(|reason| CliError::ConfigFile {
                    path: path.to_path_buf(),
                    line,
                    reason,
                })?;
        }
        Ok(())
    }

    /// Applies one config-file entry. Key names match the long flags.
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("cannot parse {value:?} for {key}"))
        }
        // Optional entries accept the literal "none" so a dumped
        // run_config.txt can be fed straight back through --config.
        fn opt_path(value: &str) -> Option<PathBuf> {
            (value != "none").then(|| PathBuf::from(value))
        }
        match key {
            "data" => self.data = opt_path(value),
            "vocab" => self.vocab = opt_path(value),
            "weights" => self.weights = opt_path(value),
            "stopwords" => self.stopwords = opt_path(value),
            "out" => self.out = PathBuf::from(value),
            "notes_column" => self.notes_column = value.into(),
            "fatalities_column" => self.fatalities_column = value.into(),
            "counts" => {
                self.counts = if value == "none" {
                    None
                } else {
                    Some(parse_usize_triple(value).map_err(|e| e.to_string())?)
                }
            }
            "ratios" => {
                self.ratios = if value == "none" {
                    None
                } else {
                    Some(parse_f64_triple(value).map_err(|e| e.to_string())?)
                }
            }
            "paper_split" => self.paper_split = parse(key, value)?,
            "stratified" => self.stratified = parse(key, value)?,
            "layers" => self.layers = parse(key, value)?,
            "hidden" => self.hidden = parse(key, value)?,
            "heads" => self.heads = parse(key, value)?,
            "ffn_dim" => self.ffn_dim = parse(key, value)?,
            "max_positions" => self.max_positions = parse(key, value)?,
            "max_seq" => self.max_seq = parse(key, value)?,
            "dropout" => self.dropout = parse(key, value)?,
            "encoder_dropout" => self.encoder_dropout = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "warmup_fraction" => self.warmup_fraction = parse(key, value)?,
            "weight_decay" => self.weight_decay = parse(key, value)?,
            "grad_clip_norm" => {
                self.grad_clip_norm = if value == "none" {
                    None
                } else {
                    Some(parse(key, value)?)
                }
            }
            "freeze_encoder" => self.freeze_encoder = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "threshold" => self.threshold = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            other => return Err(format!("unknown configuration key {other:?}")),
        }
        Ok(())
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            num_layers: self.layers,
            hidden: self.hidden,
            heads: self.heads,
            ffn_dim: self.ffn_dim,
            vocab_size,
            max_positions: self.max_positions,
            max_seq: self.max_seq,
            head_dropout: self.dropout,
            encoder_dropout: self.encoder_dropout,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            base_lr: self.lr,
            warmup_fraction: self.warmup_fraction,
            batch_size: self.batch_size,
            weight_decay: self.weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: self.seed,
            grad_clip_norm: self.grad_clip_norm,
            freeze_encoder: self.freeze_encoder,
        }
    }

    /// The replayable `key = value` dump, keys sorted, including the seed.
    pub fn render(&self) -> String {
        fn opt_path(v: &Option<PathBuf>) -> String {
            v.as_ref()
                .map_or_else(|| "none".into(), |p| p.display().to_string())
        }
        let mut pairs: Vec<(&str, String)> = vec![
            ("batch_size", self.batch_size.to_string()),
            (
                "counts",
                self.counts
                    .map_or_else(|| "none".into(), |(a, b, c)| format!("{a},{b},{c}")),
            ),
            ("data", opt_path(&self.data)),
            ("dropout", self.dropout.to_string()),
            ("encoder_dropout", self.encoder_dropout.to_string()),
            ("epochs", self.epochs.to_string()),
            ("fatalities_column", self.fatalities_column.clone()),
            ("ffn_dim", self.ffn_dim.to_string()),
            ("freeze_encoder", self.freeze_encoder.to_string()),
            (
                "grad_clip_norm",
                self.grad_clip_norm
                    .map_or_else(|| "none".into(), |v| v.to_string()),
            ),
            ("heads", self.heads.to_string()),
            ("hidden", self.hidden.to_string()),
            ("k", self.k.to_string()),
            ("layers", self.layers.to_string()),
            ("lr", self.lr.to_string()),
            ("max_positions", self.max_positions.to_string()),
            ("max_seq", self.max_seq.to_string()),
            ("notes_column", self.notes_column.clone()),
            ("out", self.out.display().to_string()),
            ("paper_split", self.paper_split.to_string()),
            (
                "ratios",
                self.ratios
                    .map_or_else(|| "none".into(), |(a, b, c)| format!("{a},{b},{c}")),
            ),
            ("seed", self.seed.to_string()),
            ("stopwords", opt_path(&self.stopwords)),
            ("stratified", self.stratified.to_string()),
            ("threshold", self.threshold.to_string()),
            ("vocab", opt_path(&self.vocab)),
            ("warmup_fraction", self.warmup_fraction.to_string()),
            ("weight_decay", self.weight_decay.to_string()),
            ("weights", opt_path(&self.weights)),
        ];
        pairs.sort_by(|a, b| a.0.cmp(b.0));
        let mut text = String::new();
        for (key, value) in pairs {
            let _ = writeln!(text, "{key} = {value}");
        }
        text
    }

    /// Writes run_config.txt into the output directory.
    pub fn write_run_config(&self) -> Result<(), CliError> {
        crate::data::create_dir(&self.out)?;
        crate::data::write_file(&self.out.join("run_config.txt"), &self.render())
    }
}

pub fn parse_usize_triple(value: &str) -> Result<(usize, usize, usize), CliError> {
    parse_triple(value, "counts")
}

pub fn parse_f64_triple(value: &str) -> Result<(f64, f64, f64), CliError> {
    parse_triple(value, "ratios")
}

fn parse_triple<T: std::str::FromStr + Copy>(
    value: &str,
    key: &str,
) -> Result<(T, T, T), CliError> {
    let bad = || CliError::BadValue {
        key: key.into(),
        reason: format!("expected three comma-separated values, got {value:?}"),
    };
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut parsed = parts.iter().map(|p| p.parse::<T>());
    match (parsed.next(), parsed.next(), parsed.next()) {
        (Some(Ok(a)), Some(Ok(b)), Some(Ok(c))) => Ok((a, b, c)),
        _ => Err(bad()),
    }
}
