//! Monte Carlo estimate of the expectations behind the closed form.
//!
//! Each sample draws channels, pilot observations, MMSE estimates and MR
//! precoders, then records for every receiving user `k` and every transmitted
//! stream `(i, b)` the effective scalar gain
//!
//! ```text
//! g = Σ_{m ∈ A_i^b} H_{m,k}^H W_{m,i}
//! ```
//!
//! From the first two moments of `g` the oracle forms
//!
//! - `D_k^c = |E{g_{k,(k,c)}}|²`
//! - `F_k  = Σ_{(i,b)} |E{g_{k,(i,b)}}|²` (no pilot structure assumed)
//! - `E_k  = Σ_{(i,b)} E{|g_{k,(i,b)}|²} − F_k`
//!
//! using the unbiased estimator `|ḡ|² − s²/n` for squared means. Standard
//! errors come from batch means over independent random streams, so results
//! do not depend on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LinkModel;
use crate::channel::ChannelStatistics;
use crate::clustering::ServingStructure;
use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::pilot::{EstimationStatistics, PilotAssignment, Powers};
use crate::rng::{batch_stream, SimRng};

const MAX_BATCHES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    /// |value − truth| within `rel_tol · |truth|` or within `num_se` standard errors.
    pub fn agrees_with(&self, truth: f64, rel_tol: f64, num_se: f64) -> bool {
        let err = (self.value - truth).abs();
        err <= rel_tol * truth.abs() || err <= num_se * self.std_error
    }

    pub fn relative_error(&self, truth: f64) -> f64 {
        (self.value - truth).abs() / truth.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub num_samples: usize,
    pub desired: Vec<Vec<Estimate>>,
    pub interference: Vec<Estimate>,
    pub contamination: Vec<Estimate>,
    /// E_k + F_k, estimated directly.
    pub received_power: Vec<Estimate>,
    /// SINRs with SIC in the group order of the serving structure.
    pub sinr: Vec<Vec<Estimate>>,
}

/// Transmitted streams in a fixed order, with the receiving-side layout.
struct StreamLayout {
    /// (user, APs) per stream.
    streams: Vec<(usize, Vec<usize>)>,
    /// Index of the first stream of each user.
    first: Vec<usize>,
}

impl StreamLayout {
    fn new(serving: &ServingStructure) -> Self {
        let mut streams = Vec::new();
        let mut first = Vec::with_capacity(serving.num_users());
        for (i, groups) in serving.groups.iter().enumerate() {
            first.push(streams.len());
            for g in groups {
                streams.push((i, g.aps.clone()));
            }
        }
        Self { streams, first }
    }
}

/// Per-(receiver, stream) sums of g and |g|².
#[derive(Clone)]
struct Moments {
    n: usize,
    sum: Vec<C64>,
    sum_sq: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Self { n: 0, sum: vec![C64::new(0.0, 0.0); len], sum_sq: vec![0.0; len] }
    }

    fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
    }

    /// Unbiased estimate of |E{g}|² at flat index `idx`.
    fn squared_mean(&self, idx: usize) -> f64 {
        let n = self.n as f64;
        let mean = self.sum[idx] / n;
        if self.n < 2 {
            return mean.norm_sqr();
        }
        let var = (self.sum_sq[idx] - n * mean.norm_sqr()) / (n - 1.0);
        mean.norm_sqr() - var / n
    }

    fn mean_square(&self, idx: usize) -> f64 {
        self.sum_sq[idx] / self.n as f64
    }
}

/// Point values of every reported quantity, flattened for batch statistics.
struct TermValues {
    desired: Vec<Vec<f64>>,
    interference: Vec<f64>,
    contamination: Vec<f64>,
    received: Vec<f64>,
    sinr: Vec<Vec<f64>>,
}

impl TermValues {
    fn from_moments(m: &Moments, layout: &StreamLayout, noise_power: f64) -> Self {
        let s_count = layout.streams.len();
        let k_count = layout.first.len();
        let mut desired = Vec::with_capacity(k_count);
        let mut interference = Vec::with_capacity(k_count);
        let mut contamination = Vec::with_capacity(k_count);
        let mut received = Vec::with_capacity(k_count);
        let mut sinr = Vec::with_capacity(k_count);
        for k in 0..k_count {
            let row = k * s_count;
            let end = layout.first.get(k + 1).copied().unwrap_or(s_count);
            let d: Vec<f64> = (layout.first[k]..end).map(|s| m.squared_mean(row + s)).collect();
            let total: f64 = (0..s_count).map(|s| m.mean_square(row + s)).sum();
            let coherent: f64 = (0..s_count).map(|s| m.squared_mean(row + s)).sum();
            let mut decoded = 0.0;
            let g = d
                .iter()
                .map(|&dc| {
                    decoded += dc;
                    dc / (total - decoded + noise_power)
                })
                .collect();
            desired.push(d);
            interference.push(total - coherent);
            contamination.push(coherent);
            received.push(total);
            sinr.push(g);
        }
        Self { desired, interference, contamination, received, sinr }
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.desired.iter().flatten().copied().collect();
        out.extend(&self.interference);
        out.extend(&self.contamination);
        out.extend(&self.received);
        out.extend(self.sinr.iter().flatten());
        out
    }
}

/// Scratch buffers and fixed per-link factors for the sampling loop.
struct Sampler<'a> {
    stats: &'a ChannelStatistics,
    estimation: &'a EstimationStatistics,
    assignment: &'a PilotAssignment,
    powers: &'a Powers,
    layout: &'a StreamLayout,
    /// (m, i, √(ρ/E‖Ĥ‖²)) for every served link with ρ > 0.
    links: Vec<(usize, usize, f64)>,
    /// Pilots in use, for skipping empty projections.
    active_pilots: Vec<bool>,
    n: usize,
    k_count: usize,
    h: Vec<C64>,
    y: Vec<C64>,
    w: Vec<C64>,
    g: Vec<C64>,
    tmp: Vec<C64>,
}

impl<'a> Sampler<'a> {
    fn new(model: &LinkModel<'a>, serving: &ServingStructure, layout: &'a StreamLayout) -> Result<Self> {
        let stats = model.stats;
        let (m_count, k_count, n) = (stats.num_aps(), stats.num_users(), stats.num_antennas());
        let tau_p = model.assignment.tau_p();
        let mut links = Vec::new();
        for (i, cluster) in serving.clusters.iter().enumerate() {
            for &m in cluster {
                let rho = model.powers.rho(m, i);
                if rho == 0.0 {
                    continue;
                }
                let energy = model.estimation.estimate_energy(m, i);
                if !(energy > 0.0) {
                    return Err(Error::DegenerateLink(format!("(AP {m}, user {i})")));
                }
                links.push((m, i, (rho / energy).sqrt()));
            }
        }
        let mut active_pilots = vec![false; tau_p];
        for k in 0..k_count {
            active_pilots[model.assignment.pilot(k)] = true;
        }
        let zero = C64::new(0.0, 0.0);
        Ok(Self {
            stats,
            estimation: model.estimation,
            assignment: model.assignment,
            powers: model.powers,
            layout,
            links,
            active_pilots,
            n,
            k_count,
            h: vec![zero; m_count * k_count * n],
            y: vec![zero; m_count * tau_p * n],
            w: vec![zero; m_count * k_count * n],
            g: vec![zero; n],
            tmp: vec![zero; n],
        })
    }

    fn draw(&mut self, rng: &mut SimRng, acc: &mut Moments) {
        let n = self.n;
        let k_count = self.k_count;
        let m_count = self.stats.num_aps();
        let tau_p = self.assignment.tau_p();

        for m in 0..m_count {
            for k in 0..k_count {
                for v in self.g.iter_mut() {
                    *v = linalg::complex_normal(rng);
                }
                let off = (m * k_count + k) * n;
                linalg::mat_vec_into(self.stats.r_sqrt(m, k), &self.g, &mut self.h[off..off + n]);
            }
        }

        let noise_amp = self.stats.noise_power().sqrt();
        for m in 0..m_count {
            for t in 0..tau_p {
                if !self.active_pilots[t] {
                    continue;
                }
                let off = (m * tau_p + t) * n;
                for v in &mut self.y[off..off + n] {
                    *v = linalg::complex_normal(rng) * noise_amp;
                }
            }
            for i in 0..k_count {
                let t = self.assignment.pilot(i);
                let amp = (self.powers.pilot[i] * tau_p as f64).sqrt();
                let (yo, ho) = ((m * tau_p + t) * n, (m * k_count + i) * n);
                for a in 0..n {
                    self.y[yo + a] += self.h[ho + a] * amp;
                }
            }
        }

        for &(m, i, scale) in &self.links {
            let yo = (m * tau_p + self.assignment.pilot(i)) * n;
            linalg::mat_vec_into(self.estimation.filter(m, i), &self.y[yo..yo + n], &mut self.tmp);
            let wo = (m * k_count + i) * n;
            for a in 0..n {
                self.w[wo + a] = self.tmp[a] * scale;
            }
        }

        let s_count = self.layout.streams.len();
        for k in 0..k_count {
            for (s, (i, aps)) in self.layout.streams.iter().enumerate() {
                let mut gain = C64::new(0.0, 0.0);
                for &m in aps {
                    let ho = (m * k_count + k) * n;
                    let wo = (m * k_count + i) * n;
                    gain += linalg::inner(&self.h[ho..ho + n], &self.w[wo..wo + n]);
                }
                let idx = k * s_count + s;
                acc.sum[idx] += gain;
                acc.sum_sq[idx] += gain.norm_sqr();
            }
        }
        acc.n += 1;
    }
}

/// Estimates every closed-form term by simulation.
///
/// Samples are split into up to 64 batches, batch `b` drawing from stream `b`
/// of `seed`; the result is identical for any thread count.
pub fn mc_oracle(serving: &ServingStructure, model: &LinkModel<'_>, num_samples: usize, seed: u64) -> Result<OracleEstimate> {
    if num_samples == 0 {
        return Err(Error::config("the oracle needs at least one sample"));
    }
    if model.stats.num_users() != serving.num_users() || model.stats.num_aps() != serving.num_aps() {
        return Err(Error::config("serving structure does not match channel statistics"));
    }
    let layout = StreamLayout::new(serving);
    // Validates links before spawning work.
    Sampler::new(model, serving, &layout)?;

    let cells = serving.num_users() * layout.streams.len();
    let batches = num_samples.min(MAX_BATCHES);
    let per_batch: Vec<usize> =
        (0..batches).map(|b| num_samples / batches + usize::from(b < num_samples % batches)).collect();

    let batch_moments: Vec<Moments> = per_batch
        .par_iter()
        .enumerate()
        .map(|(b, &count)| {
            let mut sampler = Sampler::new(model, serving, &layout).expect("links validated above");
            let mut rng = batch_stream(seed, b as u64);
            let mut acc = Moments::new(cells);
            for _ in 0..count {
                sampler.draw(&mut rng, &mut acc);
            }
            acc
        })
        .collect();

    let mut pooled = Moments::new(cells);
    for m in &batch_moments {
        pooled.merge(m);
    }
    let noise = model.stats.noise_power();
    let point = TermValues::from_moments(&pooled, &layout, noise);

    let flat_point = point.flatten();
    let mut std_errors = vec![f64::INFINITY; flat_point.len()];
    if batches >= 2 {
        let per: Vec<Vec<f64>> =
            batch_moments.iter().map(|m| TermValues::from_moments(m, &layout, noise).flatten()).collect();
        let b = batches as f64;
        for (j, se) in std_errors.iter_mut().enumerate() {
            let mean = per.iter().map(|v| v[j]).sum::<f64>() / b;
            let var = per.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / (b - 1.0);
            *se = (var / b).sqrt();
        }
    }

    let mut se = std_errors.into_iter();
    let mut wrap = |v: f64| Estimate { value: v, std_error: se.next().expect("one error per value") };
    let desired = point.desired.iter().map(|d| d.iter().map(|&v| wrap(v)).collect()).collect();
    let interference = point.interference.iter().map(|&v| wrap(v)).collect();
    let contamination = point.contamination.iter().map(|&v| wrap(v)).collect();
    let received_power = point.received.iter().map(|&v| wrap(v)).collect();
    let sinr = point.sinr.iter().map(|d| d.iter().map(|&v| wrap(v)).collect()).collect();
    Ok(OracleEstimate { num_samples, desired, interference, contamination, received_power, sinr })
}
