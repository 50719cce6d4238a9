//! User-centric AP clustering that accounts for which CPU controls each AP.
//!
//! Every multi-CPU algorithm first ranks the CPUs for a user by the large-scale
//! fading of their best AP, keeps the `n_cpu` best, and selects APs among the
//! candidates they control. With `n_cpu` equal to the number of CPUs each one
//! reduces to its single-pool counterpart. All ties go to the lowest index.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// The `legacy_cluster_size` APs with largest β, ignoring CPUs.
    LegacyLargestLsf,
    /// Candidate APs whose β clears a threshold.
    LsfThreshold,
    /// A fixed number of the strongest candidate APs.
    FixedAps,
    /// The fewest strongest candidates that capture a fraction of the candidate power.
    PowerFraction,
}

/// How `delta_threshold` is compared against β_{m,k}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Compare β_{m,k} directly.
    RawLinear,
    /// Compare β_{m,k}/σ².
    #[default]
    OverNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusteringParams {
    pub algorithm: Algorithm,
    pub n_cpu: usize,
    /// Δ, linear.
    pub delta_threshold: f64,
    pub threshold_mode: ThresholdMode,
    pub n_ap: usize,
    /// δ in (0, 1].
    pub power_fraction: f64,
    pub legacy_cluster_size: usize,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::LegacyLargestLsf,
            n_cpu: 1,
            delta_threshold: 23.5,
            threshold_mode: ThresholdMode::OverNoise,
            n_ap: 10,
            power_fraction: 0.95,
            legacy_cluster_size: 20,
        }
    }
}

impl ClusteringParams {
    pub fn validate(&self, num_cpus: usize) -> Result<()> {
        if self.n_cpu == 0 || self.n_cpu > num_cpus {
            return Err(Error::config(format!("n_cpu must lie in 1..={num_cpus}, got {}", self.n_cpu)));
        }
        if !(self.power_fraction > 0.0 && self.power_fraction <= 1.0) {
            return Err(Error::config("power_fraction must lie in (0, 1]"));
        }
        if self.n_ap == 0 || self.legacy_cluster_size == 0 {
            return Err(Error::config("n_ap and legacy_cluster_size must be at least 1"));
        }
        if !(self.delta_threshold >= 0.0) {
            return Err(Error::config("delta_threshold must be non-negative"));
        }
        Ok(())
    }
}

/// Descending by value, ascending by index on ties.
fn by_strength(beta: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| beta[b].total_cmp(&beta[a]).then(a.cmp(&b))
}

/// CPUs ranked by the β of their best AP for this user.
pub fn order_cpus(beta_column: &[f64], cpu_map: &[Vec<usize>]) -> Result<Vec<usize>> {
    let mut best = Vec::with_capacity(cpu_map.len());
    for (q, aps) in cpu_map.iter().enumerate() {
        let b = aps
            .iter()
            .map(|&m| beta_column[m])
            .max_by(f64::total_cmp)
            .ok_or_else(|| Error::config(format!("CPU {q} controls no AP")))?;
        best.push(b);
    }
    let mut order: Vec<usize> = (0..cpu_map.len()).collect();
    order.sort_by(by_strength(&best));
    Ok(order)
}

/// APs controlled by the `n_cpu` best CPUs, sorted by descending β.
///
/// CPUs that control no AP in this deployment are not ranked.
pub fn candidate_aps(beta_column: &[f64], cpu_map: &[Vec<usize>], n_cpu: usize) -> Result<Vec<usize>> {
    let active: Vec<&Vec<usize>> = cpu_map.iter().filter(|aps| !aps.is_empty()).collect();
    if active.is_empty() {
        return Err(Error::config("no CPU controls any AP"));
    }
    let active_map: Vec<Vec<usize>> = active.into_iter().cloned().collect();
    let order = order_cpus(beta_column, &active_map)?;
    let mut candidates: Vec<usize> =
        order.iter().take(n_cpu).flat_map(|&q| active_map[q].iter().copied()).collect();
    candidates.sort_by(by_strength(beta_column));
    Ok(candidates)
}

fn finish(mut cluster: Vec<usize>) -> Vec<usize> {
    cluster.sort_unstable();
    cluster
}

/// The `cluster_size` APs with largest β over the whole network.
pub fn cluster_legacy_largest_lsf(beta_column: &[f64], cluster_size: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..beta_column.len()).collect();
    all.sort_by(by_strength(beta_column));
    all.truncate(cluster_size.max(1));
    finish(all)
}

/// Candidates with β ≥ Δ, or the single best candidate if none qualifies.
pub fn cluster_lsf_threshold(beta_column: &[f64], cpu_map: &[Vec<usize>], n_cpu: usize, threshold: f64) -> Result<Vec<usize>> {
    let candidates = candidate_aps(beta_column, cpu_map, n_cpu)?;
    let chosen: Vec<usize> = candidates.iter().copied().filter(|&m| beta_column[m] >= threshold).collect();
    if chosen.is_empty() {
        return Ok(vec![candidates[0]]);
    }
    Ok(finish(chosen))
}

/// The `n_ap` strongest candidates.
pub fn cluster_fixed(beta_column: &[f64], cpu_map: &[Vec<usize>], n_cpu: usize, n_ap: usize) -> Result<Vec<usize>> {
    let mut candidates = candidate_aps(beta_column, cpu_map, n_cpu)?;
    candidates.truncate(n_ap.max(1));
    Ok(finish(candidates))
}

/// Shortest strongest-first prefix of the candidates whose β-sum reaches
/// `fraction` of the candidates' total.
pub fn cluster_power(beta_column: &[f64], cpu_map: &[Vec<usize>], n_cpu: usize, fraction: f64) -> Result<Vec<usize>> {
    let candidates = candidate_aps(beta_column, cpu_map, n_cpu)?;
    let total: f64 = candidates.iter().map(|&m| beta_column[m]).sum();
    let target = fraction * total;
    let mut acc = 0.0;
    let mut len = candidates.len();
    for (i, &m) in candidates.iter().enumerate() {
        acc += beta_column[m];
        if acc >= target {
            len = i + 1;
            break;
        }
    }
    Ok(finish(candidates[..len].to_vec()))
}

/// Clusters every user with the configured algorithm.
///
/// `noise_power` scales Δ when the threshold is expressed relative to noise.
pub fn form_clusters(beta_columns: &[Vec<f64>], cpu_map: &[Vec<usize>], params: &ClusteringParams, noise_power: f64) -> Result<Vec<Vec<usize>>> {
    params.validate(cpu_map.len())?;
    let threshold = match params.threshold_mode {
        ThresholdMode::RawLinear => params.delta_threshold,
        ThresholdMode::OverNoise => params.delta_threshold * noise_power,
    };
    beta_columns
        .iter()
        .map(|beta| match params.algorithm {
            Algorithm::LegacyLargestLsf => Ok(cluster_legacy_largest_lsf(beta, params.legacy_cluster_size)),
            Algorithm::LsfThreshold => cluster_lsf_threshold(beta, cpu_map, params.n_cpu, threshold),
            Algorithm::FixedAps => cluster_fixed(beta, cpu_map, params.n_cpu, params.n_ap),
            Algorithm::PowerFraction => cluster_power(beta, cpu_map, params.n_cpu, params.power_fraction),
        })
        .collect()
}

/// A set of APs that transmit one symbol coherently to a user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoherentGroup {
    /// Controlling CPU when the group is CPU-pure.
    pub cpu: Option<usize>,
    pub aps: Vec<usize>,
}

/// Splits a cluster into its per-CPU parts, in CPU index order.
pub fn coherent_groups(cluster: &[usize], ap_cpu: &[usize], num_cpus: usize) -> Vec<CoherentGroup> {
    let mut per_cpu = vec![Vec::new(); num_cpus];
    for &m in cluster {
        per_cpu[ap_cpu[m]].push(m);
    }
    per_cpu
        .into_iter()
        .enumerate()
        .filter(|(_, aps)| !aps.is_empty())
        .map(|(q, mut aps)| {
            aps.sort_unstable();
            CoherentGroup { cpu: Some(q), aps }
        })
        .collect()
}

/// U_m = {k : m ∈ A_k}.
pub fn served_users(clusters: &[Vec<usize>], num_aps: usize) -> Vec<Vec<usize>> {
    let mut served = vec![Vec::new(); num_aps];
    for (k, cluster) in clusters.iter().enumerate() {
        for &m in cluster {
            served[m].push(k);
        }
    }
    served
}

/// How the APs of each cluster are grouped for transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransmissionMode {
    /// One group per user spanning all its APs; needs every CPU synchronized.
    Coherent,
    /// One group per AP.
    NonCoherent,
    /// One group per CPU.
    Mixed,
}

impl TransmissionMode {
    pub const ALL: [TransmissionMode; 3] = [TransmissionMode::Coherent, TransmissionMode::NonCoherent, TransmissionMode::Mixed];

    pub fn name(self) -> &'static str {
        match self {
            TransmissionMode::Coherent => "coherent",
            TransmissionMode::NonCoherent => "non_coherent",
            TransmissionMode::Mixed => "mixed",
        }
    }
}

/// Clusters A_k, coherent groups A_k^c, and served sets U_m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServingStructure {
    pub clusters: Vec<Vec<usize>>,
    pub groups: Vec<Vec<CoherentGroup>>,
    pub served: Vec<Vec<usize>>,
}

impl ServingStructure {
    pub fn new(clusters: Vec<Vec<usize>>, groups: Vec<Vec<CoherentGroup>>, num_aps: usize) -> Result<Self> {
        if clusters.len() != groups.len() {
            return Err(Error::config("one group list per user is required"));
        }
        for (k, (cluster, user_groups)) in clusters.iter().zip(&groups).enumerate() {
            if cluster.is_empty() || user_groups.iter().any(|g| g.aps.is_empty()) {
                return Err(Error::config(format!("user {k} has an empty cluster or group")));
            }
            let mut union: Vec<usize> = user_groups.iter().flat_map(|g| g.aps.iter().copied()).collect();
            union.sort_unstable();
            let mut sorted = cluster.clone();
            sorted.sort_unstable();
            if union != sorted {
                return Err(Error::config(format!("groups of user {k} do not partition its cluster")));
            }
            if sorted.iter().any(|&m| m >= num_aps) {
                return Err(Error::config(format!("cluster of user {k} references a missing AP")));
            }
        }
        let served = served_users(&clusters, num_aps);
        Ok(Self { clusters, groups, served })
    }

    /// Groups clusters according to `mode`.
    pub fn build(clusters: Vec<Vec<usize>>, mode: TransmissionMode, ap_cpu: &[usize], num_cpus: usize) -> Result<Self> {
        let groups = clusters
            .iter()
            .map(|cluster| match mode {
                TransmissionMode::Coherent => vec![CoherentGroup { cpu: single_cpu(cluster, ap_cpu), aps: cluster.clone() }],
                TransmissionMode::NonCoherent => cluster
                    .iter()
                    .map(|&m| CoherentGroup { cpu: Some(ap_cpu[m]), aps: vec![m] })
                    .collect(),
                TransmissionMode::Mixed => coherent_groups(cluster, ap_cpu, num_cpus),
            })
            .collect();
        Self::new(clusters, groups, ap_cpu.len())
    }

    pub fn num_users(&self) -> usize {
        self.clusters.len()
    }

    pub fn num_aps(&self) -> usize {
        self.served.len()
    }

    pub fn group_count(&self, k: usize) -> usize {
        self.groups[k].len()
    }
}

fn single_cpu(cluster: &[usize], ap_cpu: &[usize]) -> Option<usize> {
    let first = ap_cpu[cluster[0]];
    cluster.iter().all(|&m| ap_cpu[m] == first).then_some(first)
}
