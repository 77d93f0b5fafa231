//! Central finite-difference gradient checking.
//!
//! The numeric side always runs in 64-bit so a failed check points at a
//! wrong backward formula rather than at float rounding. Callers evaluate
//! their forward pass inside the closure; this module only perturbs inputs
//! and compares gradients.

use alloc::vec::Vec;

/// Perturbation step for central differences.
pub const DEFAULT_STEP: f64 = 1e-4;

/// Entries where |analytic| + |numeric| falls below this are treated as
/// jointly zero and skipped by the relative-error comparison.
pub const REL_ERROR_FLOOR: f64 = 1e-8;

/// Central-difference gradient of a scalar-valued function at `x`.
pub fn central_difference<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], step: f64) -> Vec<f64> {
    let mut point = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let original = point[i];
        point[i] = original + step;
        let plus = f(&point);
        point[i] = original - step;
        let minus = f(&point);
        point[i] = original;
        grad.push((plus - minus) / (2.0 * step));
    }
    grad
}

/// Worst-case relative disagreement |a−n| / (|a|+|n|) across all entries
/// whose combined magnitude clears `floor`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    let mut worst = 0.0f64;
    for (&a, &n) in analytic.iter().zip(numeric.iter()) {
        let scale = a.abs() + n.abs();
        if scale > floor {
            let rel = (a - n).abs() / scale;
            if rel > worst {
                worst = rel;
            }
        }
    }
    worst
}
