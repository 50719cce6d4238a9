//! Closed-form downlink spectral efficiency of mixed coherent/non-coherent
//! transmission with MR precoding, MMSE estimates, and SIC at the user.
//!
//! For user `k` served by coherent groups `c = 1..C_k` (in decoding order) the
//! effective SINR of group `c` is
//!
//! ```text
//! γ_k^c = D_k^c / (E_k + F_k − Σ_{b ≤ c} D_k^b + σ²)
//! ```
//!
//! where `D` is the squared mean gain of the group, `E` the total average
//! power from every transmitted stream less its coherent part, and `F` the
//! coherent part from every stream on the user's pilot (own streams included).
//! Every `G` matrix is evaluated per AP: `G^{(m)}_{i,k} = R_{m,i} Ψ_{m,t}^{-1} R_{m,k}`,
//! with `t` the pilot of user `i`.

pub mod oracle;
pub mod reference;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelStatistics;
use crate::clustering::ServingStructure;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::pilot::{EstimationStatistics, PilotAssignment, Powers};

pub use oracle::{mc_oracle, Estimate, OracleEstimate};

/// Coherence block layout in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameConfig {
    pub tau_c: usize,
    pub tau_p: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self { tau_c: 200, tau_p: 10 }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau_p == 0 || self.tau_p >= self.tau_c {
            return Err(Error::config(format!(
                "frame needs 1 <= tau_p < tau_c, got tau_p = {}, tau_c = {}",
                self.tau_p, self.tau_c
            )));
        }
        Ok(())
    }

    /// τ_d / τ_c with τ_d = τ_c − τ_p.
    pub fn prelog(&self) -> f64 {
        (self.tau_c - self.tau_p) as f64 / self.tau_c as f64
    }
}

/// Decoding order of a user's coherent groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SicOrder {
    /// Strongest desired signal decoded first; ties keep the CPU order.
    #[default]
    DescendingDesired,
    /// Keep groups in the order they were built.
    AsBuilt,
}

/// Per-user closed-form terms. `desired[k][c]` follows the group order of the
/// serving structure they were computed for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SETerms {
    pub desired: Vec<Vec<f64>>,
    pub interference: Vec<f64>,
    pub contamination: Vec<f64>,
}

impl SETerms {
    pub fn num_users(&self) -> usize {
        self.interference.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub sinr: Vec<Vec<f64>>,
    pub group_rate: Vec<Vec<f64>>,
    pub user_rate: Vec<f64>,
    pub sum_rate: f64,
    pub prelog: f64,
}

/// W = √ρ Ĥ / √E{‖Ĥ‖²}.
pub fn mr_precoder(h_hat: &CVector, rho: f64, estimate_energy: f64) -> Result<CVector> {
    if rho == 0.0 {
        return Ok(CVector::zeros(h_hat.len()));
    }
    if !(estimate_energy > 0.0) {
        return Err(Error::DegenerateLink("(precoder input)".into()));
    }
    Ok(h_hat * C64::new((rho / estimate_energy).sqrt(), 0.0))
}

/// Per-drop context shared by the closed form and its reference factorizations.
pub struct LinkModel<'a> {
    pub stats: &'a ChannelStatistics,
    pub estimation: &'a EstimationStatistics,
    pub assignment: &'a PilotAssignment,
    pub powers: &'a Powers,
}

impl<'a> LinkModel<'a> {
    pub fn new(
        stats: &'a ChannelStatistics,
        estimation: &'a EstimationStatistics,
        assignment: &'a PilotAssignment,
        powers: &'a Powers,
    ) -> Self {
        Self { stats, estimation, assignment, powers }
    }

    fn tau_p(&self) -> f64 {
        self.assignment.tau_p() as f64
    }

    /// R_{m,i} Ψ_{m,t_i}^{-1}
    fn r_psi(&self, m: usize, i: usize) -> CMatrix {
        self.stats.r(m, i) * self.estimation.psi_inv(m, self.assignment.pilot(i))
    }

    /// tr(G_{i,i}) for a link that carries power; `None` when ρ = 0.
    fn checked_gain(&self, m: usize, i: usize) -> Result<Option<f64>> {
        if self.powers.rho(m, i) == 0.0 {
            return Ok(None);
        }
        let g = self.estimation.gain_trace(m, i);
        if !(g > 0.0) || self.powers.pilot[i] == 0.0 {
            return Err(Error::DegenerateLink(format!("(AP {m}, user {i})")));
        }
        Ok(Some(g))
    }

    /// √(ρ_{m,k} p_k τ_p tr(R Ψ^{-1} R)): mean gain of AP m's stream to its own user.
    pub fn desired_amplitude(&self, m: usize, k: usize) -> Result<f64> {
        Ok(match self.checked_gain(m, k)? {
            Some(g) => (self.powers.rho(m, k) * self.powers.pilot[k] * self.tau_p() * g).sqrt(),
            None => 0.0,
        })
    }

    /// ρ_{m,i} tr(R_{m,k} G_{i,i}) / tr(G_{i,i}): average power at user k of AP m's stream to user i.
    pub fn link_power(&self, m: usize, i: usize, k: usize) -> Result<f64> {
        Ok(match self.checked_gain(m, i)? {
            Some(g) => {
                let gmat = self.r_psi(m, i) * self.stats.r(m, i);
                self.powers.rho(m, i) * linalg::trace_product(self.stats.r(m, k), &gmat).re / g
            }
            None => 0.0,
        })
    }

    /// √(ρ_{m,i} p_k τ_p) tr(G_{i,k}) / √tr(G_{i,i}): mean gain at user k of AP m's stream to
    /// user i. Zero unless the two users share a pilot.
    pub fn cross_amplitude(&self, m: usize, i: usize, k: usize) -> Result<C64> {
        if !self.assignment.share_pilot(i, k) {
            return Ok(C64::new(0.0, 0.0));
        }
        Ok(match self.checked_gain(m, i)? {
            Some(g) => {
                let tr = linalg::trace_product(&self.r_psi(m, i), self.stats.r(m, k));
                tr * (self.powers.rho(m, i) * self.powers.pilot[k] * self.tau_p()).sqrt() / g.sqrt()
            }
            None => C64::new(0.0, 0.0),
        })
    }
}

/// Evaluates D_k^c, E_k and F_k for every user.
pub fn compute_terms(serving: &ServingStructure, model: &LinkModel<'_>) -> Result<SETerms> {
    let k_count = serving.num_users();
    let stats = model.stats;
    if stats.num_users() != k_count || stats.num_aps() != serving.num_aps() {
        return Err(Error::config("serving structure does not match channel statistics"));
    }

    let desired = (0..k_count)
        .map(|k| {
            serving.groups[k]
                .iter()
                .map(|g| {
                    let amp = g.aps.iter().map(|&m| model.desired_amplitude(m, k)).sum::<Result<f64>>()?;
                    Ok(amp * amp)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    // E: every served link (m, i) radiates power towards every user k.
    let mut interference = vec![0.0; k_count];
    for (i, cluster) in serving.clusters.iter().enumerate() {
        for &m in cluster {
            let Some(g) = model.checked_gain(m, i)? else { continue };
            let gmat = model.r_psi(m, i) * stats.r(m, i);
            let rho = model.powers.rho(m, i);
            for (k, e) in interference.iter_mut().enumerate() {
                *e += rho * linalg::trace_product(stats.r(m, k), &gmat).re / g;
            }
        }
    }

    // F: coherent sums over each group of every co-pilot user.
    let mut contamination = vec![0.0; k_count];
    for (k, f) in contamination.iter_mut().enumerate() {
        for i in model.assignment.copilots(k) {
            for group in &serving.groups[i] {
                let amp = group.aps.iter().map(|&m| model.cross_amplitude(m, i, k)).sum::<Result<C64>>()?;
                *f += amp.norm_sqr();
            }
        }
    }

    Ok(SETerms { desired, interference, contamination })
}

/// Reorders each user's groups (and their D terms) into SIC decoding order.
pub fn apply_sic_order(serving: &mut ServingStructure, terms: &mut SETerms, order: SicOrder) {
    if order == SicOrder::AsBuilt {
        return;
    }
    for k in 0..serving.num_users() {
        let mut idx: Vec<usize> = (0..serving.groups[k].len()).collect();
        idx.sort_by(|&a, &b| terms.desired[k][b].total_cmp(&terms.desired[k][a]));
        serving.groups[k] = idx.iter().map(|&c| serving.groups[k][c].clone()).collect();
        terms.desired[k] = idx.iter().map(|&c| terms.desired[k][c]).collect();
    }
}

/// γ_k^c with the partial D-sum over the first `c + 1` groups (zero-based `c`).
pub fn sinr_mixed(terms: &SETerms, k: usize, c: usize, noise_power: f64) -> Result<f64> {
    let d = &terms.desired[k];
    let decoded: f64 = d[..=c].iter().sum();
    let denom = terms.interference[k] + terms.contamination[k] - decoded + noise_power;
    if !(denom > 0.0) {
        return Err(Error::numerical(format!("non-positive SINR denominator {denom:e} for user {k}, group {c}")));
    }
    Ok(d[c] / denom)
}

/// Per-group SINRs and rates, per-user totals, and the sum rate.
pub fn user_rates(terms: &SETerms, frame: &FrameConfig, noise_power: f64) -> Result<RateResult> {
    frame.validate()?;
    let prelog = frame.prelog();
    let sinr = (0..terms.num_users())
        .map(|k| (0..terms.desired[k].len()).map(|c| sinr_mixed(terms, k, c, noise_power)).collect())
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let group_rate: Vec<Vec<f64>> =
        sinr.iter().map(|g| g.iter().map(|s| prelog * (1.0 + s).log2()).collect()).collect();
    let user_rate: Vec<f64> = group_rate.iter().map(|r| r.iter().sum()).collect();
    let sum_rate = user_rate.iter().sum();
    Ok(RateResult { sinr, group_rate, user_rate, sum_rate, prelog })
}
