//! Aggregation of per-drop results.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::batch_stream;

const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub sum_rate: f64,
    pub probability: f64,
}

/// Empirical CDF evaluated at each sorted sample: F(x_(i)) = i / n.
pub fn empirical_cdf(samples: &[f64]) -> Vec<CdfPoint> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, x)| CdfPoint { sum_rate: x, probability: (i + 1) as f64 / n })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub p5: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
    /// Percentile bootstrap 95% interval of the mean.
    pub mean_ci95: [f64; 2],
}

impl Summary {
    pub fn from_samples(samples: &[f64], bootstrap_seed: u64) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mean = mean(samples);
        let std_dev = if n > 1 {
            (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            count: n,
            mean,
            std_dev,
            min: sorted[0],
            p5: quantile(&sorted, 0.05),
            median: quantile(&sorted, 0.5),
            p95: quantile(&sorted, 0.95),
            max: sorted[n - 1],
            mean_ci95: bootstrap_mean_ci(samples, 0.95, BOOTSTRAP_RESAMPLES, bootstrap_seed),
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn bootstrap_mean_ci(samples: &[f64], level: f64, resamples: usize, seed: u64) -> [f64; 2] {
    let n = samples.len();
    let mut rng = batch_stream(seed, 0);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    [quantile(&means, tail), quantile(&means, 1.0 - tail)]
}
