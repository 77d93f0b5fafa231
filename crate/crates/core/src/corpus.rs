//! Corpus handling: event records, deduplication, label binarization,
//! and seeded train/validation/test splitting.
//!
//! CSV parsing itself lives in the CLI crate; this module holds the pure
//! row validation and everything downstream of it.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::rng::{shuffled_indices, stream_rng, STREAM_SPLIT};

/// One ingested event row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub notes: String,
    pub fatalities: u64,
    pub event_date: Option<String>,
    pub location: Option<String>,
}

/// A classification example: event text plus a fatal/non-fatal label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub text: String,
    /// 1 = fatal, 0 = non-fatal.
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RowError {
    #[error("notes field is empty after trimming")]
    EmptyNotes,
    #[error("fatalities value {value:?} is not a non-negative integer")]
    BadFatalities { value: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("split counts sum to {requested} but the corpus has {corpus} examples")]
    CountMismatch { requested: usize, corpus: usize },
}

impl EventRecord {
    /// Validates the two required fields of a data row. Notes are stored
    /// verbatim (the non-empty check trims, the stored text does not);
    /// fatalities must parse as a base-10 non-negative integer.
    pub fn parse(notes: &str, fatalities: &str) -> Result<Self, RowError> {
        if notes.trim().is_empty() {
            return Err(RowError::EmptyNotes);
        }
        let fatalities = fatalities
            .trim()
            .parse::<u64>()
            .map_err(|_| RowError::BadFatalities {
                value: fatalities.to_string(),
            })?;
        Ok(Self {
            notes: notes.to_string(),
            fatalities,
            event_date: None,
            location: None,
        })
    }
}

/// Removes rows whose notes byte-equal an earlier row's notes; the first
/// occurrence survives and relative order is preserved.
pub fn deduplicate(records: Vec<EventRecord>) -> Vec<EventRecord> {
    let keep: Vec<bool> = {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        records
            .iter()
            .map(|r| seen.insert(r.notes.as_str()))
            .collect()
    };
    records
        .into_iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r))
        .collect()
}

/// Maps fatality counts to binary labels: 1 for any non-zero count.
pub fn binarize(records: Vec<EventRecord>) -> Vec<LabeledExample> {
    records
        .into_iter()
        .map(|r| LabeledExample {
            label: u8::from(r.fatalities > 0),
            text: r.notes,
        })
        .collect()
}

/// Which of the three splits an example landed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Validation => "validation",
            SplitName::Test => "test",
        }
    }
}

/// A partition of the corpus. `assignments[i]` names the split of source
/// example `i`; the three lists hold the examples in source order.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledExample>,
    pub validation: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    pub seed: u64,
    pub assignments: Vec<SplitName>,
}

/// Allocates `amount` items across bins proportional to `sizes` using the
/// largest-remainder rule; ties go to the lower bin index. The result sums
/// to `amount` exactly and each entry is within 1 of the ideal share.
pub(crate) fn largest_remainder_allocation(amount: usize, sizes: &[usize]) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return vec![0; sizes.len()];
    }
    let mut shares: Vec<usize> = sizes.iter().map(|&s| amount * s / total).collect();
    let deficit = amount - shares.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&i| (core::cmp::Reverse(amount * sizes[i] % total), i));
    for &i in order.iter().take(deficit) {
        shares[i] += 1;
    }
    shares
}

/// Splits the corpus into train/validation/test of exactly the requested
/// sizes, deterministically for a fixed seed.
///
/// Membership comes from a seeded shuffle. When `stratified` is set the
/// positive labels are first apportioned across the splits by largest
/// remainder, which keeps every split's positive fraction within
/// 1/|split| of the corpus fraction. The returned lists are in source
/// order; per-epoch training order is the trainer's concern.
pub fn split(
    examples: Vec<LabeledExample>,
    counts: (usize, usize, usize),
    seed: u64,
    stratified: bool,
) -> Result<DatasetSplit, SplitError> {
    let n = examples.len();
    let requested = counts.0 + counts.1 + counts.2;
    if requested != n {
        return Err(SplitError::CountMismatch {
            requested,
            corpus: n,
        });
    }

    let mut rng = stream_rng(seed, STREAM_SPLIT);
    let perm = shuffled_indices(&mut rng, n);
    let sizes = [counts.0, counts.1, counts.2];

    let mut assignments = vec![SplitName::Train; n];
    let names = [SplitName::Train, SplitName::Validation, SplitName::Test];
    if stratified {
        let positives = examples.iter().filter(|e| e.label == 1).count();
        let pos_quota = largest_remainder_allocation(positives, &sizes);
        // Remaining capacity per (label, split); shuffled examples fill
        // the first split whose quota for their label is still open.
        let mut quota = [
            [
                sizes[0] - pos_quota[0],
                sizes[1] - pos_quota[1],
                sizes[2] - pos_quota[2],
            ],
            [pos_quota[0], pos_quota[1], pos_quota[2]],
        ];
        for &idx in &perm {
            let label = examples[idx].label as usize;
            let s = (0..3)
                .find(|&s| quota[label][s] > 0)
                .expect("quotas cover every example by construction");
            quota[label][s] -= 1;
            assignments[idx] = names[s];
        }
    } else {
        for (pos, &idx) in perm.iter().enumerate() {
            assignments[idx] = if pos < sizes[0] {
                SplitName::Train
            } else if pos < sizes[0] + sizes[1] {
                SplitName::Validation
            } else {
                SplitName::Test
            };
        }
    }

    let mut train = Vec::with_capacity(sizes[0]);
    let mut validation = Vec::with_capacity(sizes[1]);
    let mut test = Vec::with_capacity(sizes[2]);
    for (example, &name) in examples.into_iter().zip(assignments.iter()) {
        match name {
            SplitName::Train => train.push(example),
            SplitName::Validation => validation.push(example),
            SplitName::Test => test.push(example),
        }
    }
    Ok(DatasetSplit {
        train,
        validation,
        test,
        seed,
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn record(notes: &str, fatalities: u64) -> EventRecord {
        EventRecord {
            notes: notes.to_string(),
            fatalities,
            event_date: None,
            location: None,
        }
    }

    fn example(text: &str, label: u8) -> LabeledExample {
        LabeledExample {
            text: text.to_string(),
            label,
        }
    }

    #[test]
    fn parse_maps_fields() {
        let r = EventRecord::parse("Taliban forces raided a house", "2").unwrap();
        assert_eq!(r.notes, "Taliban forces raided a house");
        assert_eq!(r.fatalities, 2);
    }

    #[test]
    fn parse_rejects_bad_rows() {
        assert_eq!(
            EventRecord::parse("some notes", "abc"),
            Err(RowError::BadFatalities { value: "abc".to_string() })
        );
        assert_eq!(
            EventRecord::parse("some notes", "-1"),
            Err(RowError::BadFatalities { value: "-1".to_string() })
        );
        assert_eq!(EventRecord::parse("   ", "2"), Err(RowError::EmptyNotes));
    }

    #[test]
    fn dedup_drops_repeats_keeps_first() {
        let out = deduplicate(vec![record("a", 1), record("a", 9), record("b", 0)]);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].notes, "a");
        assert_eq!(out[0].fatalities, 1);
        assert_eq!(out[1].notes, "b");
    }

    #[test]
    fn dedup_empty_is_empty() {
        assert!(deduplicate(vec![]).is_empty());
    }

    #[test]
    fn dedup_preserves_order() {
        let out = deduplicate(vec![record("a", 1), record("b", 0), record("a", 2)]);
        assert_eq!(
            out.iter().map(|r| r.notes.as_str()).collect::<Vec<_>>(),
            ["a", "b"]
        );
    }

    #[test]
    fn dedup_is_idempotent() {
        let records = vec![
            record("x", 1),
            record("y", 0),
            record("x", 3),
            record("z", 0),
            record("y", 1),
        ];
        let once = deduplicate(records);
        let twice = deduplicate(once.clone());
        assert_eq!(once, twice);
    }

    #[test]
    fn binarize_thresholds_at_nonzero() {
        let out = binarize(vec![record("a", 0), record("b", 3), record("c", 1)]);
        assert_eq!(out.iter().map(|e| e.label).collect::<Vec<_>>(), [0, 1, 1]);
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].text, "a");
    }

    #[test]
    fn split_sizes_are_exact_at_reference_scale() {
        let examples: Vec<LabeledExample> = (0..4752)
            .map(|i| example(&format!("note {i}"), (i % 4 == 0) as u8))
            .collect();
        let split = split(examples, (3826, 426, 500), 42, true).unwrap();
        assert_eq!(split.train.len(), 3826);
        assert_eq!(split.validation.len(), 426);
        assert_eq!(split.test.len(), 500);
    }

    #[test]
    fn stratified_tiny_case_puts_four_positives_in_train() {
        // 10 examples, 5 positive, counts (8,1,1): train's positive quota
        // is 5*8/10 = 4 exactly, so any seed must land 4 there.
        let examples: Vec<LabeledExample> =
            (0..10).map(|i| example(&format!("t{i}"), (i < 5) as u8)).collect();
        let split = split(examples, (8, 1, 1), 7, true).unwrap();
        let train_pos = split.train.iter().filter(|e| e.label == 1).count();
        assert_eq!(train_pos, 4);
    }

    #[test]
    fn split_rejects_count_mismatch() {
        let examples = vec![example("a", 0), example("b", 1)];
        assert_eq!(
            split(examples, (1, 1, 1), 0, true),
            Err(SplitError::CountMismatch { requested: 3, corpus: 2 })
        );
    }

    #[test]
    fn split_partitions_exactly_for_many_seeds() {
        for seed in 0..20u64 {
            let examples: Vec<LabeledExample> =
                (0..37).map(|i| example(&format!("n{i}"), (i % 3 == 0) as u8)).collect();
            let s = split(examples, (25, 7, 5), seed, seed % 2 == 0).unwrap();
            assert_eq!(s.assignments.len(), 37);
            assert_eq!(s.train.len() + s.validation.len() + s.test.len(), 37);
            // Every source text appears exactly once across the three lists.
            let mut seen: Vec<&str> = s
                .train
                .iter()
                .chain(s.validation.iter())
                .chain(s.test.iter())
                .map(|e| e.text.as_str())
                .collect();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), 37);
        }
    }

    #[test]
    fn split_is_deterministic() {
        let make = || -> Vec<LabeledExample> {
            (0..50).map(|i| example(&format!("n{i}"), (i % 5 == 0) as u8)).collect()
        };
        let a = split(make(), (30, 10, 10), 1234, true).unwrap();
        let b = split(make(), (30, 10, 10), 1234, true).unwrap();
        assert_eq!(a, b);
        let c = split(make(), (30, 10, 10), 1235, true).unwrap();
        assert_ne!(a.assignments, c.assignments);
    }

    #[test]
    fn stratified_fractions_stay_within_one_over_split_size() {
        for seed in 0..10u64 {
            let n = 83;
            let examples: Vec<LabeledExample> =
                (0..n).map(|i| example(&format!("n{i}"), (i % 7 < 3) as u8)).collect();
            let positives = examples.iter().filter(|e| e.label == 1).count();
            let corpus_fraction = positives as f64 / n as f64;
            let s = split(examples, (60, 13, 10), seed, true).unwrap();
            for part in [&s.train, &s.validation, &s.test] {
                let pos = part.iter().filter(|e| e.label == 1).count();
                let fraction = pos as f64 / part.len() as f64;
                assert!(
                    (fraction - corpus_fraction).abs() < 1.0 / part.len() as f64 + 1e-12,
                    "fraction {fraction} vs corpus {corpus_fraction} in split of {}",
                    part.len()
                );
            }
        }
    }

    #[test]
    fn largest_remainder_sums_and_stays_close() {
        let shares = largest_remainder_allocation(5, &[8, 1, 1]);
        assert_eq!(shares, vec![4, 1, 0]);
        let shares = largest_remainder_allocation(0, &[3, 2, 1]);
        assert_eq!(shares, vec![0, 0, 0]);
        let shares = largest_remainder_allocation(7, &[0, 0, 0]);
        assert_eq!(shares, vec![0, 0, 0]);
        for amount in 0..30 {
            let sizes = [17, 6, 7];
            let shares = largest_remainder_allocation(amount, &sizes);
            assert_eq!(shares.iter().sum::<usize>(), amount);
            let total: usize = sizes.iter().sum();
            for (i, &share) in shares.iter().enumerate() {
                let ideal = amount as f64 * sizes[i] as f64 / total as f64;
                assert!((share as f64 - ideal).abs() < 1.0);
            }
        }
    }
}
