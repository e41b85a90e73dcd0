use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub const DEFAULT_ITERATIONS: usize = 100_000;
/// Largest topic count tested by full enumeration.
pub const EXACT_MAX_TOPICS: usize = 20;

fn differences(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "paired inputs differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("no topics to compare".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite per-topic value".into()));
    }
    Ok(d)
}

/// Absolute sums within this distance of the observed one count as reaching it.
fn tolerance(d: &[f64]) -> f64 {
    1e-10 * d.iter().map(|v| v.abs()).sum::<f64>()
}

/// Two-sided paired sign-flip test over every flip pattern.
pub fn exact_p_value(d: &[f64]) -> f64 {
    assert!(d.len() <= EXACT_MAX_TOPICS, "exact enumeration limited to {EXACT_MAX_TOPICS} topics");
    let observed = d.iter().sum::<f64>().abs();
    let threshold = observed - tolerance(d);
    let total = 1u64 << d.len();
    let mut hits = 0u64;
    for mask in 0..total {
        let s: f64 = d
            .iter()
            .enumerate()
            .map(|(i, &v)| if mask >> i & 1 == 1 { -v } else { v })
            .sum();
        if s.abs() >= threshold {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

/// Seeded sampled sign flips with the add-one estimator.
pub fn monte_carlo_p_value(d: &[f64], iterations: usize, seed: u64) -> f64 {
    let observed = d.iter().sum::<f64>().abs();
    let threshold = observed - tolerance(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..iterations {
        let mut s = 0.0;
        for chunk in d.chunks(64) {
            let bits = rng.next_u64();
            for (i, &v) in chunk.iter().enumerate() {
                s += if bits >> i & 1 == 1 { -v } else { v };
            }
        }
        if s.abs() >= threshold {
            hits += 1;
        }
    }
    (1 + hits) as f64 / (1 + iterations) as f64
}

/// Paired randomization test on per-topic values; exact for small topic counts.
pub fn randomization_test(a: &[f64], b: &[f64], iterations: usize, seed: u64) -> Result<f64> {
    let d = differences(a, b)?;
    if d.len() <= EXACT_MAX_TOPICS {
        Ok(exact_p_value(&d))
    } else {
        if iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be positive".into()));
        }
        Ok(monte_carlo_p_value(&d, iterations, seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_inputs() {
        let a = [0.2, 0.4, 0.9];
        assert_eq!(randomization_test(&a, &a, 1000, 1).unwrap(), 1.0);
        assert_eq!(randomization_test(&[0.5], &[0.2], 1000, 1).unwrap(), 1.0);
        assert!(randomization_test(&[1.0], &[1.0, 2.0], 10, 1).is_err());
        assert!(randomization_test(&[], &[], 10, 1).is_err());
    }

    #[test]
    fn three_equal_differences() {
        assert_eq!(exact_p_value(&[0.1, 0.1, 0.1]), 0.25);
        let p = randomization_test(&[0.3, 0.5, 0.7], &[0.2, 0.4, 0.6], 10, 0).unwrap();
        assert_eq!(p, 0.25);
    }

    #[test]
    fn monte_carlo_is_seeded_and_bounded() {
        let a: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..30).map(|i| (i as f64 * 0.11).cos() * 0.5).collect();
        let p1 = randomization_test(&a, &b, 2000, 7).unwrap();
        assert_eq!(p1, randomization_test(&a, &b, 2000, 7).unwrap());
        assert!(p1 > 0.0 && p1 <= 1.0);
        let zeros = vec![0.0; 30];
        assert_eq!(randomization_test(&zeros, &zeros, 500, 3).unwrap(), 1.0);
    }
}
