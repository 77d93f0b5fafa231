//! Binary-classification metrics: confusion counts, accuracy, precision,
//! recall, F1.
//!
//! Zero-denominator cases are surfaced as `None` instead of being coerced
//! to 0 or 1; silent coercion corrupts small-sample evaluation. Stored
//! values keep full precision; rounding happens only at presentation time.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("prediction/label length mismatch: {predicted} predictions vs {actual} labels")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("cannot evaluate an empty prediction set")]
    Empty,
}

/// Counts of (predicted, actual) pairs: tp=(1,1), fp=(1,0), fn=(0,1),
/// tn=(0,0). Always sums to the number of evaluated examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            true_negatives: tn,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }

    /// (tp+tn)/total; `None` on an empty count.
    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        Some((self.true_positives + self.true_negatives) as f64 / total as f64)
    }

    /// tp/(tp+fp); `None` when nothing was predicted positive.
    pub fn precision(&self) -> Option<f64> {
        let denom = self.true_positives + self.false_positives;
        if denom == 0 {
            return None;
        }
        Some(self.true_positives as f64 / denom as f64)
    }

    /// tp/(tp+fn); `None` when there are no actual positives.
    pub fn recall(&self) -> Option<f64> {
        let denom = self.true_positives + self.false_negatives;
        if denom == 0 {
            return None;
        }
        Some(self.true_positives as f64 / denom as f64)
    }

    /// Harmonic mean of precision and recall; undefined precision or
    /// recall propagates, as does precision = recall = 0.
    pub fn f1(&self) -> Option<f64> {
        harmonic_mean_f1(self.precision()?, self.recall()?)
    }
}

/// 2·P·R/(P+R); `None` when both rates are zero.
pub fn harmonic_mean_f1(precision: f64, recall: f64) -> Option<f64> {
    if precision + recall == 0.0 {
        return None;
    }
    Some(2.0 * precision * recall / (precision + recall))
}

/// Tallies (predicted, actual) pairs into confusion counts.
pub fn confusion(predicted: &[u8], actual: &[u8]) -> Result<ConfusionCounts, MetricsError> {
    if predicted.len() != actual.len() {
        return Err(MetricsError::LengthMismatch {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut counts = ConfusionCounts::default();
    for (&p, &a) in predicted.iter().zip(actual.iter()) {
        debug_assert!(p <= 1 && a <= 1, "labels must be 0 or 1");
        match (p, a) {
            (1, 1) => counts.true_positives += 1,
            (1, 0) => counts.false_positives += 1,
            (0, 1) => counts.false_negatives += 1,
            _ => counts.true_negatives += 1,
        }
    }
    Ok(counts)
}

/// The four metrics plus the counts they came from. `None` marks an
/// undefined metric (zero denominator).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub confusion: ConfusionCounts,
}

impl MetricsReport {
    pub fn from_counts(confusion: ConfusionCounts) -> Self {
        Self {
            accuracy: confusion.accuracy(),
            precision: confusion.precision(),
            recall: confusion.recall(),
            f1: confusion.f1(),
            confusion,
        }
    }
}

/// Rounds to `decimals` places, half away from zero (99.6047 → 99.6 at
/// one decimal, 98.75 → 98.8). Presentation only.
pub fn round_half_away(value: f64, decimals: u32) -> f64 {
    let scale = libm::pow(10.0, decimals as f64);
    libm::round(value * scale) / scale
}
