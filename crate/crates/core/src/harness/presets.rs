//! Ready-made experiment grids: transmission modes under legacy clustering,
//! cluster-size sweeps, and multi-CPU clustering studies.
//!
//! Absolute rates depend on the pathloss constants in
//! [`PathLossParams`](crate::channel::PathLossParams); the grids are meant
//! for comparing shapes and orderings across points.

use serde_json::json;

use super::{ExperimentConfig, SweepGrid};
use crate::clustering::{Algorithm, ClusteringParams};
use crate::error::{Error, Result};

fn modes() -> Vec<serde_json::Value> {
    vec![json!("coherent"), json!("non_coherent"), json!("mixed")]
}

/// Rate CDF of the three transmission modes under legacy clustering.
pub fn fig1(mut base: ExperimentConfig) -> ExperimentConfig {
    base.scenario.num_aps = 40;
    base.scenario.num_users = 10;
    base.scenario.num_antennas = 2;
    base.clustering = ClusteringParams { algorithm: Algorithm::LegacyLargestLsf, legacy_cluster_size: 10, ..Default::default() };
    base.sweep = Some(SweepGrid::from([("transmission_mode".to_string(), modes())]));
    base
}

/// Total rate against the legacy cluster size for the three modes.
pub fn fig2(mut base: ExperimentConfig) -> ExperimentConfig {
    base = fig1(base);
    let sizes = [1, 2, 4, 8, 16].into_iter().map(|a| json!(a)).collect();
    base.sweep = Some(SweepGrid::from([
        ("clustering.legacy_cluster_size".to_string(), sizes),
        ("transmission_mode".to_string(), modes()),
    ]));
    base
}

/// Multi-CPU clustering studies: total rate against the number of APs for
/// every `n_cpu`, algorithm parameter, and transmission mode.
pub fn fig3_6(mut base: ExperimentConfig, algorithm: Algorithm) -> Result<ExperimentConfig> {
    let (param, values) = match algorithm {
        Algorithm::PowerFraction => ("clustering.power_fraction", vec![json!(0.85), json!(0.90), json!(0.95)]),
        Algorithm::FixedAps => ("clustering.n_ap", vec![json!(5), json!(10), json!(15)]),
        Algorithm::LsfThreshold => ("clustering.delta_threshold", vec![json!(23.5), json!(64.36), json!(266.06)]),
        Algorithm::LegacyLargestLsf => return Err(Error::config("fig3-6 covers the multi-CPU algorithms only")),
    };
    base.scenario.num_users = 20;
    base.scenario.num_antennas = 2;
    base.clustering.algorithm = algorithm;
    base.sweep = Some(SweepGrid::from([
        ("scenario.num_aps".to_string(), vec![json!(40), json!(80), json!(120)]),
        ("clustering.n_cpu".to_string(), vec![json!(1), json!(2), json!(4)]),
        (param.to_string(), values),
        ("transmission_mode".to_string(), modes()),
    ]));
    Ok(base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_expand() {
        assert_eq!(fig1(ExperimentConfig::default()).expand_sweep().unwrap().len(), 3);
        assert_eq!(fig2(ExperimentConfig::default()).expand_sweep().unwrap().len(), 15);
        for alg in [Algorithm::PowerFraction, Algorithm::FixedAps, Algorithm::LsfThreshold] {
            let c = fig3_6(ExperimentConfig::default(), alg).unwrap();
            assert_eq!(c.expand_sweep().unwrap().len(), 81);
        }
        assert!(fig3_6(ExperimentConfig::default(), Algorithm::LegacyLargestLsf).is_err());
    }
}
