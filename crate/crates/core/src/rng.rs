//! Deterministic randomness.
//!
//! Every random choice in the pipeline (parameter init, epoch shuffles,
//! dropout masks, dataset splitting) derives from one master seed through
//! fixed ChaCha12 stream ids, so a single integer reproduces a run and the
//! consumers cannot perturb each other's sequences.

use rand_chacha::rand_core::{RngCore, SeedableRng};
// Re-exported because it appears in public signatures here and in the
// kernels and forward-pass APIs.
pub use rand_chacha::ChaCha12Rng;

use alloc::vec::Vec;

/// Stream id for parameter initialization.
pub const STREAM_INIT: u64 = 1;
/// Stream id for per-epoch training shuffles.
pub const STREAM_SHUFFLE: u64 = 2;
/// Stream id for dropout masks.
pub const STREAM_DROPOUT: u64 = 3;
/// Stream id for dataset splitting.
pub const STREAM_SPLIT: u64 = 4;

/// Generator for one named stream of the master seed.
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw in [0, 1) with 53 random mantissa bits.
pub fn uniform_f64(rng: &mut ChaCha12Rng) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    (rng.next_u64() >> 11) as f64 * SCALE
}

/// Standard normal draw via Box-Muller.
///
/// The radius input is drawn from (0, 1] so the logarithm is always finite.
pub fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * SCALE;
    let u2 = uniform_f64(rng);
    let radius = libm::sqrt(-2.0 * libm::log(u1));
    radius * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// Normal draw with the tails beyond two standard deviations rejected,
/// then scaled by `std`. Matches the usual truncated-normal weight init.
pub fn truncated_normal(rng: &mut ChaCha12Rng, std: f64) -> f64 {
    loop {
        let z = standard_normal(rng);
        if z.abs() <= 2.0 {
            return z * std;
        }
    }
}

/// Unbiased draw from [0, n) by rejecting the biased low range.
fn bounded_u64(rng: &mut ChaCha12Rng, n: u64) -> u64 {
    debug_assert!(n > 0);
    let threshold = n.wrapping_neg() % n;
    loop {
        let x = rng.next_u64();
        if x >= threshold {
            return x % n;
        }
    }
}

/// In-place Fisher-Yates shuffle.
pub fn fisher_yates<T>(rng: &mut ChaCha12Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = bounded_u64(rng, (i + 1) as u64) as usize;
        items.swap(i, j);
    }
}

/// The identity permutation of `n` indices, shuffled.
pub fn shuffled_indices(rng: &mut ChaCha12Rng, n: usize) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..n).collect();
    fisher_yates(rng, &mut indices);
    indices
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_independent() {
        let a: Vec<u64> = {
            let mut rng = stream_rng(42, STREAM_INIT);
            (0..8).map(|_| rng.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut rng = stream_rng(42, STREAM_SHUFFLE);
            (0..8).map(|_| rng.next_u64()).collect()
        };
        assert_ne!(a, b);
        let a2: Vec<u64> = {
            let mut rng = stream_rng(42, STREAM_INIT);
            (0..8).map(|_| rng.next_u64()).collect()
        };
        assert_eq!(a, a2);
    }

    #[test]
    fn uniform_stays_in_unit_interval() {
        let mut rng = stream_rng(7, STREAM_DROPOUT);
        for _ in 0..10_000 {
            let x = uniform_f64(&mut rng);
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn truncated_normal_respects_bounds() {
        let mut rng = stream_rng(3, STREAM_INIT);
        for _ in 0..10_000 {
            let x = truncated_normal(&mut rng, 0.02);
            assert!(x.abs() <= 0.04 + 1e-12);
        }
    }

    #[test]
    fn standard_normal_moments_are_sane() {
        let mut rng = stream_rng(11, STREAM_INIT);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let x = standard_normal(&mut rng);
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut rng = stream_rng(5, STREAM_SHUFFLE);
        let perm = shuffled_indices(&mut rng, 100);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_ne!(perm, (0..100).collect::<Vec<_>>());
    }
}
