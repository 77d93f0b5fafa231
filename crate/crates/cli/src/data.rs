//! File plumbing: CSV readers with row-indexed error reports, vocabulary
//! and weight-file loading, and small path-aware fs wrappers.

use std::fmt::Write as _;
use std::path::Path;

use fatality_core::corpus::{EventRecord, LabeledExample};
use fatality_core::model::serialize;
use fatality_core::model::{ModelConfig, ParameterSet};
use fatality_core::tokenizer::Vocabulary;

use crate::error::CliError;

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_error(path: &Path, err: &csv::Error) -> CliError {
    CliError::Csv {
        path: path.to_path_buf(),
        message: err.to_string(),
    }
}

/// Column indices resolved from the header row.
fn column_index(path: &Path, headers: &csv::StringRecord, name: &str) -> Result<usize, CliError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Csv {
            path: path.to_path_buf(),
            message: format!("missing column {name:?}"),
        })
}

/// Collects every rejected row into one report instead of stopping at the
/// first, so a dirty file is fixable in a single pass.
fn row_report(path: &Path, rows: Vec<(u64, String)>) -> CliError {
    let mut message = format!(
        "{}: {} invalid row{}",
        path.display(),
        rows.len(),
        if rows.len() == 1 { "" } else { "s" }
    );
    for (line, reason) in rows {
        let _ = write!(message, "\n  line {line}: {reason}");
    }
    CliError::InvalidRows { message }
}

/// Reads an ACLED-style CSV: any column layout, `notes` and `fatalities`
/// located by header name. Quoting, embedded commas, and embedded
/// newlines follow standard CSV rules.
pub fn load_events_csv(
    path: &Path,
    notes_column: &str,
    fatalities_column: &str,
) -> Result<Vec<EventRecord>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, &e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, &e))?.clone();
    let notes_idx = column_index(path, &headers, notes_column)?;
    let fatalities_idx = column_index(path, &headers, fatalities_column)?;

    let mut records = Vec::new();
    let mut bad_rows = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| csv_error(path, &e))?;
        let line = record.position().map_or(0, |p| p.line());
        let notes = record.get(notes_idx).unwrap_or("");
        let fatalities = record.get(fatalities_idx).unwrap_or("");
        match EventRecord::parse(notes, fatalities) {
            Ok(event) => records.push(event),
            Err(err) => bad_rows.push((line, err.to_string())),
        }
    }
    if bad_rows.is_empty() {
        Ok(records)
    } else {
        Err(row_report(path, bad_rows))
    }
}

/// Reads a labeled split CSV with `text` and `label` columns, the format
/// the split command writes.
pub fn load_labeled_csv(path: &Path) -> Result<Vec<LabeledExample>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, &e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, &e))?.clone();
    let text_idx = column_index(path, &headers, "text")?;
    let label_idx = column_index(path, &headers, "label")?;

    let mut examples = Vec::new();
    let mut bad_rows = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| csv_error(path, &e))?;
        let line = record.position().map_or(0, |p| p.line());
        let text = record.get(text_idx).unwrap_or("");
        let label = record.get(label_idx).unwrap_or("");
        if text.trim().is_empty() {
            bad_rows.push((line, "text field is empty after trimming".into()));
            continue;
        }
        match label {
            "0" | "1" => examples.push(LabeledExample {
                text: text.to_string(),
                label: label.parse().expect("checked binary"),
            }),
            other => bad_rows.push((line, format!("label {other:?} is not 0 or 1"))),
        }
    }
    if bad_rows.is_empty() {
        Ok(examples)
    } else {
        Err(row_report(path, bad_rows))
    }
}

pub fn write_labeled_csv(path: &Path, examples: &[LabeledExample]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, &e))?;
    writer
        .write_record(["text", "label"])
        .map_err(|e| csv_error(path, &e))?;
    for example in examples {
        writer
            .write_record([example.text.as_str(), if example.label == 1 { "1" } else { "0" }])
            .map_err(|e| csv_error(path, &e))?;
    }
    writer.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_vocab(path: &Path) -> Result<Vocabulary, CliError> {
    let text = read_file(path)?;
    Vocabulary::from_lines(text.lines()).map_err(|source| CliError::BadVocab {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_weights(path: &Path) -> Result<(ParameterSet<f32>, ModelConfig), CliError> {
    let bytes = read_bytes(path)?;
    serialize::from_bytes(&bytes).map_err(|source| CliError::BadWeights {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_weights(
    path: &Path,
    params: &ParameterSet<f32>,
    config: &ModelConfig,
) -> Result<(), CliError> {
    write_file(path, serialize::to_bytes(params, config))
}

/// Loads weights and the vocabulary together, rejecting a vocabulary whose
/// size differs from the embedding table in the weight file.
pub fn load_model(
    weights: &Path,
    vocab: &Path,
) -> Result<(ParameterSet<f32>, ModelConfig, Vocabulary), CliError> {
    let (params, config) = load_weights(weights)?;
    let vocabulary = load_vocab(vocab)?;
    if vocabulary.len() != config.vocab_size {
        return Err(CliError::VocabSizeMismatch {
            vocab: vocabulary.len(),
            weights: config.vocab_size,
        });
    }
    Ok((params, config, vocabulary))
}
