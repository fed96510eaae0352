//! Small estimation helpers shared by the Monte Carlo checks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// A sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    /// Mean and standard error of independent observations.
    pub fn from_samples(values: &[f64]) -> Estimate {
        let n = values.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                stderr: f64::INFINITY,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            f64::INFINITY
        };
        Estimate {
            mean,
            stderr: (var / n as f64).sqrt(),
            n,
        }
    }

    /// Binomial proportion with the plug-in standard error.
    pub fn proportion(hits: usize, n: usize) -> Estimate {
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                stderr: f64::INFINITY,
                n,
            };
        }
        let p = hits as f64 / n as f64;
        Estimate {
            mean: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
            n,
        }
    }

    /// Batch-means estimate of the mean of a correlated 0/1 sequence.
    pub fn batch_means(flags: &[bool], batches: usize) -> Estimate {
        let batches = batches.max(2).min(flags.len().max(2));
        let size = flags.len() / batches;
        if size == 0 {
            return Estimate::proportion(flags.iter().filter(|&&f| f).count(), flags.len());
        }
        let means: Vec<f64> = flags
            .chunks_exact(size)
            .map(|c| c.iter().filter(|&&f| f).count() as f64 / size as f64)
            .collect();
        Estimate::from_samples(&means)
    }

    /// True iff the mean exceeds `x` by fewer than `sigmas` standard errors.
    pub fn at_most(&self, x: f64, sigmas: f64) -> bool {
        self.mean <= x + sigmas * self.stderr
    }

    /// True iff the mean is below `x` by more than `sigmas` standard errors.
    pub fn clearly_below(&self, x: f64, sigmas: f64) -> bool {
        self.mean + sigmas * self.stderr < x
    }
}

/// Total-variation distance between two finitely supported laws.
pub fn total_variation<K: Ord>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut sum = 0.0;
    for (k, &pa) in a {
        sum += (pa - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, &pb) in b {
        if !a.contains_key(k) {
            sum += pb;
        }
    }
    0.5 * sum
}

/// Mutual information (nats) of a finitely supported joint law.
pub fn mutual_information<A: Ord + Clone, B: Ord + Clone>(joint: &BTreeMap<(A, B), f64>) -> f64 {
    let mut left: BTreeMap<A, f64> = BTreeMap::new();
    let mut right: BTreeMap<B, f64> = BTreeMap::new();
    for ((a, b), &m) in joint {
        *left.entry(a.clone()).or_insert(0.0) += m;
        *right.entry(b.clone()).or_insert(0.0) += m;
    }
    joint
        .iter()
        .filter(|(_, &m)| m > 0.0)
        .map(|((a, b), &m)| m * (m / (left[a] * right[b])).ln())
        .sum()
}
