//! Seeded Monte Carlo experiments over random drops.
//!
//! A drop is one deployment with its statistics, pilots, clusters and
//! closed-form rates. Drop `d` of an experiment draws all of its randomness
//! from streams derived from `(base_seed, d)` (see [`crate::rng`]), so results
//! are identical whether drops run serially or on many threads, and every
//! sweep point sees the same deployments.

mod config;
pub mod output;
pub mod presets;
pub mod stats;
pub mod validation;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::channel_stats;
use crate::clustering::{form_clusters, ServingStructure};
use crate::error::{Error, Result};
use crate::pilot::{assign_pilots, EstimationStatistics, Powers};
use crate::rng::{derive_seed, stream, Stage};
use crate::scenario::generate_deployment_with;
use crate::spectral_efficiency::{apply_sic_order, compute_terms, mc_oracle, user_rates, LinkModel};

pub use config::{ExperimentConfig, OracleConfig, SweepGrid};
pub use stats::{empirical_cdf, CdfPoint, Summary};

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Agreement between the closed form and the oracle for one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub num_samples: usize,
    /// Largest relative deviation over all D, E, F and SINR values.
    pub max_relative_error: f64,
    /// Every value within 2% or 3 standard errors.
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropResult {
    pub drop_index: u64,
    /// Seed of the drop's deployment stream.
    pub seed: u64,
    pub user_rates: Vec<f64>,
    pub sum_rate: f64,
    pub cluster_sizes: Vec<usize>,
    pub group_counts: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oracle: Option<OracleCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub sweep_point: BTreeMap<String, Value>,
    pub config: ExperimentConfig,
    pub drops: Vec<DropResult>,
    pub summary: Summary,
    pub cdf: Vec<CdfPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub points: Vec<ExperimentResult>,
}

fn at_stage<T>(drop_index: u64, stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Drop { drop_index, stage, source: Box::new(e) })
}

/// Runs the full pipeline for one drop.
pub fn run_drop(config: &ExperimentConfig, drop_index: u64) -> Result<DropResult> {
    let base = config.base_seed;
    let sc = &config.scenario;

    let deployment = at_stage(drop_index, "deployment", generate_deployment_with(sc, &mut stream(base, drop_index, Stage::Deployment)))?;
    let stats = at_stage(
        drop_index,
        "channel statistics",
        channel_stats(&deployment, &config.large_scale, sc.num_antennas, &mut stream(base, drop_index, Stage::Shadowing)),
    )?;
    let assignment = at_stage(
        drop_index,
        "pilot assignment",
        assign_pilots(sc.num_users, config.frame.tau_p, &mut stream(base, drop_index, Stage::Pilots)),
    )?;

    let beta: Vec<Vec<f64>> = (0..sc.num_users).map(|k| stats.beta_column(k)).collect();
    let clusters = at_stage(
        drop_index,
        "clustering",
        form_clusters(&beta, &deployment.cpu_map, &config.clustering, stats.noise_power()),
    )?;
    let mut serving = at_stage(
        drop_index,
        "clustering",
        ServingStructure::build(clusters, config.transmission_mode, &deployment.ap_cpu, deployment.num_cpus()),
    )?;

    let mut powers = Powers::uniform(&config.powers, sc.num_aps, sc.num_users);
    at_stage(
        drop_index,
        "power budget",
        powers.enforce_budget(&serving.served, config.powers.ap_power_budget, config.powers.budget_mode),
    )?;
    let estimation = at_stage(drop_index, "estimation", EstimationStatistics::new(&stats, &assignment, &powers))?;
    let model = LinkModel::new(&stats, &estimation, &assignment, &powers);

    let mut terms = at_stage(drop_index, "closed-form terms", compute_terms(&serving, &model))?;
    apply_sic_order(&mut serving, &mut terms, config.sic_order);
    let rates = at_stage(drop_index, "rates", user_rates(&terms, &config.frame, stats.noise_power()))?;

    let oracle = if config.oracle.enabled {
        let seed = derive_seed(base, drop_index, Stage::Oracle);
        let est = at_stage(drop_index, "oracle", mc_oracle(&serving, &model, config.oracle.num_samples, seed))?;
        Some(validation::compare_with_oracle(&terms, &rates, &est))
    } else {
        None
    };

    Ok(DropResult {
        drop_index,
        seed: derive_seed(base, drop_index, Stage::Deployment),
        user_rates: rates.user_rate,
        sum_rate: rates.sum_rate,
        cluster_sizes: serving.clusters.iter().map(Vec::len).collect(),
        group_counts: serving.groups.iter().map(Vec::len).collect(),
        oracle,
    })
}

/// Runs every drop of every sweep point on up to `jobs` threads.
///
/// Fails if any drop fails, reporting the number of failures and the first one.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentReport> {
    config.validate()?;
    let points = config.expand_sweep()?;
    let tasks: Vec<(usize, u64)> =
        (0..points.len()).flat_map(|p| (0..points[p].1.num_drops as u64).map(move |d| (p, d))).collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start {jobs} workers: {e}")))?;
    let outcomes: Vec<Result<DropResult>> =
        pool.install(|| tasks.par_iter().map(|&(p, d)| run_drop(&points[p].1, d)).collect());

    let failures = outcomes.iter().filter(|r| r.is_err()).count();
    let mut per_point: Vec<Vec<DropResult>> = vec![Vec::new(); points.len()];
    for ((p, _), outcome) in tasks.iter().zip(outcomes) {
        match outcome {
            Ok(drop) => per_point[*p].push(drop),
            Err(e) if failures == 1 => return Err(e),
            Err(e) => return Err(Error::numerical(format!("{failures} drops failed; first: {e}"))),
        }
    }

    let results = points
        .into_iter()
        .zip(per_point)
        .enumerate()
        .map(|(idx, ((sweep_point, point_config), mut drops))| {
            drops.sort_by_key(|d| d.drop_index);
            let sums: Vec<f64> = drops.iter().map(|d| d.sum_rate).collect();
            let summary = Summary::from_samples(&sums, derive_seed(config.base_seed, idx as u64, Stage::Bootstrap));
            ExperimentResult { sweep_point, config: point_config, cdf: empirical_cdf(&sums), drops, summary }
        })
        .collect();
    Ok(ExperimentReport { version: VERSION.to_string(), points: results })
}
