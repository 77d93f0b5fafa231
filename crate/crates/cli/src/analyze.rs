//! The analyze command: length statistics and per-class word-frequency
//! tables over a deduplicated event corpus.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use fatality_core::analytics::{
    default_stopwords, length_stats, top_k_words, word_cloud_export, WordFrequencyTable,
};
use fatality_core::corpus::{binarize, deduplicate};

use crate::error::CliError;
use crate::settings::Settings;
use crate::AnalyzeArgs;

pub fn run(args: AnalyzeArgs) -> Result<(), CliError> {
    let mut settings = Settings::load(args.config.as_deref())?;
    if let Some(v) = args.data {
        settings.data = Some(v);
    }
    if let Some(v) = args.out {
        settings.out = v;
    }
    if let Some(v) = args.k {
        settings.k = v;
    }
    if let Some(v) = args.stopwords {
        settings.stopwords = Some(v);
    }
    if let Some(v) = args.notes_column {
        settings.notes_column = v;
    }
    if let Some(v) = args.fatalities_column {
        settings.fatalities_column = v;
    }
    if settings.k == 0 {
        return Err(CliError::BadValue {
            key: "k".to_string(),
            reason: "must be at least 1".to_string(),
        });
    }

    let data = settings
        .data
        .clone()
        .ok_or(CliError::MissingPath { flag: "data" })?;
    let records = crate::data::load_events_csv(
        &data,
        &settings.notes_column,
        &settings.fatalities_column,
    )?;
    let examples = binarize(deduplicate(records));

    let texts: Vec<&str> = examples.iter().map(|e| e.text.as_str()).collect();
    let stats = length_stats(&texts)?;

    let stopwords = match &settings.stopwords {
        Some(path) => load_stopwords(path)?,
        None => default_stopwords(),
    };

    let fatal: Vec<&str> = examples
        .iter()
        .filter(|e| e.label == 1)
        .map(|e| e.text.as_str())
        .collect();
    let nonfatal: Vec<&str> = examples
        .iter()
        .filter(|e| e.label == 0)
        .map(|e| e.text.as_str())
        .collect();
    for (class, subset) in [("fatal", &fatal), ("non-fatal", &nonfatal)] {
        if subset.is_empty() {
            eprintln!("warning: corpus has no {class} examples; its word table will be empty");
        }
    }

    let fatal_table = top_k_words(&fatal, settings.k, &stopwords);
    let nonfatal_table = top_k_words(&nonfatal, settings.k, &stopwords);
    let cloud = word_cloud_export(&texts, &stopwords);

    crate::data::create_dir(&settings.out)?;
    let stats_tsv = format!(
        "char_min\tchar_mean\tchar_max\tword_min\tword_mean\tword_max\n{}\t{}\t{}\t{}\t{}\t{}\n",
        stats.char_min,
        stats.char_mean,
        stats.char_max,
        stats.word_min,
        stats.word_mean,
        stats.word_max,
    );
    crate::data::write_file(&settings.out.join("length_stats.tsv"), &stats_tsv)?;
    crate::data::write_file(
        &settings.out.join("top_words_fatal.tsv"),
        &table_tsv(&fatal_table),
    )?;
    crate::data::write_file(
        &settings.out.join("top_words_nonfatal.tsv"),
        &table_tsv(&nonfatal_table),
    )?;
    crate::data::write_file(&settings.out.join("word_cloud.tsv"), &table_tsv(&cloud))?;
    settings.write_run_config()?;

    println!(
        "analyzed {} unique events ({} fatal, {} non-fatal), {} distinct words",
        examples.len(),
        fatal.len(),
        nonfatal.len(),
        cloud.entries.len()
    );
    Ok(())
}

/// Headerless `word<TAB>count` lines, highest count first.
fn table_tsv(table: &WordFrequencyTable) -> String {
    let mut out = String::new();
    for (word, count) in &table.entries {
        writeln!(out, "{word}\t{count}").expect("string writes cannot fail");
    }
    out
}

/// One stopword per line, trimmed and lowercased; blank lines skipped.
fn load_stopwords(path: &Path) -> Result<BTreeSet<String>, CliError> {
    let text = crate::data::read_file(path)?;
    Ok(text
        .lines()
        .map(|line| line.trim().to_lowercase())
        .filter(|line| !line.is_empty())
        .collect())
}
