use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::LargeScaleModelConfig;
use crate::clustering::{ClusteringParams, TransmissionMode};
use crate::error::{Error, Result};
use crate::pilot::PowerConfig;
use crate::scenario::ScenarioConfig;
use crate::spectral_efficiency::{FrameConfig, SicOrder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub enabled: bool,
    pub num_samples: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { enabled: false, num_samples: 100_000 }
    }
}

/// Sweep grid: dotted config path → values. Keys iterate in sorted order.
pub type SweepGrid = BTreeMap<String, Vec<Value>>;

/// One experiment. Every field has a default, so `{}` is a valid config file.
///
/// `scenario.seed` is ignored by experiments: each drop derives its own
/// streams from `base_seed` and the drop index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub large_scale: LargeScaleModelConfig,
    pub powers: PowerConfig,
    pub clustering: ClusteringParams,
    pub sic_order: SicOrder,
    pub frame: FrameConfig,
    pub transmission_mode: TransmissionMode,
    pub num_drops: usize,
    pub oracle: OracleConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepGrid>,
    pub base_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            large_scale: LargeScaleModelConfig::default(),
            powers: PowerConfig::default(),
            clustering: ClusteringParams::default(),
            sic_order: SicOrder::default(),
            frame: FrameConfig::default(),
            transmission_mode: TransmissionMode::Mixed,
            num_drops: 200,
            oracle: OracleConfig::default(),
            sweep: None,
            base_seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.large_scale.validate()?;
        self.powers.validate()?;
        self.clustering.validate(self.scenario.num_cpus())?;
        self.frame.validate()?;
        if self.num_drops == 0 {
            return Err(Error::config("num_drops must be at least 1"));
        }
        if self.oracle.enabled && self.oracle.num_samples == 0 {
            return Err(Error::config("oracle.num_samples must be at least 1"));
        }
        if let Some(grid) = &self.sweep {
            for (key, values) in grid {
                if values.is_empty() {
                    return Err(Error::config(format!("sweep key {key} has no values")));
                }
            }
        }
        Ok(())
    }

    /// Every point of the sweep grid, as (assignments, config). A config
    /// without a sweep yields itself with an empty assignment.
    pub fn expand_sweep(&self) -> Result<Vec<(BTreeMap<String, Value>, ExperimentConfig)>> {
        let Some(grid) = &self.sweep else {
            return Ok(vec![(BTreeMap::new(), self.clone())]);
        };
        let mut base = self.clone();
        base.sweep = None;
        let base_value = serde_json::to_value(&base)?;

        let mut points: Vec<BTreeMap<String, Value>> = vec![BTreeMap::new()];
        for (key, values) in grid {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut next = p.clone();
                        next.insert(key.clone(), v.clone());
                        next
                    })
                })
                .collect();
        }

        points
            .into_iter()
            .map(|point| {
                let mut value = base_value.clone();
                for (key, v) in &point {
                    set_path(&mut value, key, v.clone())?;
                }
                let config: ExperimentConfig = serde_json::from_value(value)
                    .map_err(|e| Error::config(format!("sweep point {point:?}: {e}")))?;
                config.validate()?;
                Ok((point, config))
            })
            .collect()
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    if path == "sweep" || path.starts_with("sweep.") {
        return Err(Error::config("the sweep grid cannot itself be swept"));
    }
    let mut cursor = root;
    for part in path.split('.') {
        cursor = cursor
            .get_mut(part)
            .ok_or_else(|| Error::config(format!("unknown sweep key {path}")))?;
    }
    *cursor = value;
    Ok(())
}
