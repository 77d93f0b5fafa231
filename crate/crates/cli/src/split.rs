//! The split command: load, deduplicate, binarize, partition, and write
//! the three labeled CSVs plus a replay manifest.

use std::fmt::Write as _;

use fatality_core::corpus::{binarize, deduplicate, split, DatasetSplit};

use crate::error::CliError;
use crate::settings::{parse_f64_triple, parse_usize_triple, Settings};
use crate::SplitArgs;

pub fn run(args: SplitArgs) -> Result<(), CliError> {
    let mut settings = Settings::load(args.config.as_deref())?;
    let stratified_flag = args.stratified_flag();
    if let Some(v) = args.data {
        settings.data = Some(v);
    }
    if let Some(v) = args.out {
        settings.out = v;
    }
    if let Some(v) = args.seed {
        settings.seed = v;
    }
    if let Some(v) = stratified_flag {
        settings.stratified = v;
    }
    if let Some(v) = args.notes_column {
        settings.notes_column = v;
    }
    if let Some(v) = args.fatalities_column {
        settings.fatalities_column = v;
    }
    // A split mode on the command line replaces whatever the file chose.
    let flag_modes =
        usize::from(args.paper_split) + usize::from(args.counts.is_some()) + usize::from(args.ratios.is_some());
    if flag_modes > 1 {
        return Err(CliError::SplitModeConflict);
    }
    if flag_modes == 1 {
        settings.paper_split = args.paper_split;
        settings.counts = match &args.counts {
            Some(raw) => Some(parse_usize_triple(raw)?),
            None => None,
        };
        settings.ratios = match &args.ratios {
            Some(raw) => Some(parse_f64_triple(raw)?),
            None => None,
        };
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
    let counts = resolve_counts(&settings, examples.len())?;
    let dataset = split(examples, counts, settings.seed, settings.stratified)?;

    crate::data::create_dir(&settings.out)?;
    crate::data::write_labeled_csv(&settings.out.join("train.csv"), &dataset.train)?;
    crate::data::write_labeled_csv(&settings.out.join("validation.csv"), &dataset.validation)?;
    crate::data::write_labeled_csv(&settings.out.join("test.csv"), &dataset.test)?;
    crate::data::write_file(&settings.out.join("split_manifest.tsv"), manifest(&dataset, &settings))?;
    settings.write_run_config()?;

    println!(
        "split {} examples into {} train / {} validation / {} test",
        dataset.assignments.len(),
        dataset.train.len(),
        dataset.validation.len(),
        dataset.test.len()
    );
    Ok(())
}

/// One line per example (`index<TAB>split-name`) after the seed and the
/// stratification choice, enough to replay the exact partition.
fn manifest(dataset: &DatasetSplit, settings: &Settings) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "seed\t{}", dataset.seed);
    let _ = writeln!(text, "stratified\t{}", settings.stratified);
    for (index, name) in dataset.assignments.iter().enumerate() {
        let _ = writeln!(text, "{index}\t{}", name.as_str());
    }
    text
}

fn resolve_counts(settings: &Settings, total: usize) -> Result<(usize, usize, usize), CliError> {
    let chosen = usize::from(settings.paper_split)
        + usize::from(settings.counts.is_some())
        + usize::from(settings.ratios.is_some());
    if chosen > 1 {
        return Err(CliError::SplitModeConflict);
    }
    if settings.paper_split {
        return Ok((3826, 426, 500));
    }
    if let Some(counts) = settings.counts {
        return Ok(counts);
    }
    if let Some(ratios) = settings.ratios {
        return ratio_counts(total, ratios);
    }
    Err(CliError::SplitModeMissing)
}

/// Largest-remainder rounding of the ratio shares; ties go to the earlier
/// split so results are deterministic.
fn ratio_counts(total: usize, ratios: (f64, f64, f64)) -> Result<(usize, usize, usize), CliError> {
    let shares = [ratios.0, ratios.1, ratios.2];
    let sum: f64 = shares.iter().sum();
    if !(sum > 0.0) || shares.iter().any(|&r| r < 0.0) {
        return Err(CliError::BadValue {
            key: "ratios".into(),
            reason: format!("shares must be non-negative with a positive sum, got {ratios:?}"),
        });
    }
    let quotas: Vec<f64> = shares.iter().map(|r| total as f64 * r / sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in 0..total - assigned {
        counts[order[i % 3]] += 1;
    }
    Ok((counts[0], counts[1], counts[2]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_counts_use_largest_remainder() {
        // 0.8/0.1/0.1 of 38: quotas 30.4/3.8/3.8, remainders favor the
        // validation slot first on the tie with test.
        assert_eq!(ratio_counts(38, (0.8, 0.1, 0.1)).unwrap(), (30, 4, 4));
        assert_eq!(ratio_counts(10, (0.5, 0.25, 0.25)).unwrap(), (5, 3, 2));
        assert_eq!(ratio_counts(0, (1.0, 1.0, 1.0)).unwrap(), (0, 0, 0));
        // Shares need not sum to one.
        assert_eq!(ratio_counts(4752, (3826.0, 426.0, 500.0)).unwrap(), (3826, 426, 500));
    }

    #[test]
    fn degenerate_ratios_are_rejected() {
        assert!(ratio_counts(10, (0.0, 0.0, 0.0)).is_err());
        assert!(ratio_counts(10, (-0.5, 1.0, 0.5)).is_err());
    }
}
