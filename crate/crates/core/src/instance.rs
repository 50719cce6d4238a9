//! Random single-drop instances for tests, validation runs and benchmarks.

use crate::channel::{channel_stats, ChannelStatistics, LargeScaleModelConfig};
use crate::error::Result;
use crate::pilot::{assign_pilots, EstimationStatistics, PilotAssignment, PowerConfig, Powers};
use crate::rng::batch_stream;
use crate::scenario::{generate_deployment_with, Deployment, Point, ScenarioConfig, QUADRANT_CPUS};
use crate::spectral_efficiency::LinkModel;

/// CPU layout for `q` CPUs: the four quadrant centers when `q` is 4, otherwise
/// evenly spaced on a 250 m circle (the origin for a single CPU).
pub fn cpu_layout(q: usize) -> Vec<Point> {
    match q {
        1 => vec![[0.0, 0.0]],
        4 => QUADRANT_CPUS.to_vec(),
        _ => (0..q)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / q as f64;
                [250.0 * a.cos(), 250.0 * a.sin()]
            })
            .collect(),
    }
}

/// Everything the closed form and the oracle need for one drop.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub deployment: Deployment,
    pub ap_cpu: Vec<usize>,
    pub stats: ChannelStatistics,
    pub assignment: PilotAssignment,
    pub powers: Powers,
    pub estimation: EstimationStatistics,
}

impl RandomInstance {
    pub fn generate(
        scenario: &ScenarioConfig,
        large_scale: &LargeScaleModelConfig,
        power: &PowerConfig,
        tau_p: usize,
        seed: u64,
    ) -> Result<Self> {
        let deployment = generate_deployment_with(scenario, &mut batch_stream(seed, 0))?;
        let stats = channel_stats(&deployment, large_scale, scenario.num_antennas, &mut batch_stream(seed, 1))?;
        let assignment = assign_pilots(scenario.num_users, tau_p, &mut batch_stream(seed, 2))?;
        let powers = Powers::uniform(power, scenario.num_aps, scenario.num_users);
        let estimation = EstimationStatistics::new(&stats, &assignment, &powers)?;
        let ap_cpu = deployment.ap_cpu.clone();
        Ok(Self { deployment, ap_cpu, stats, assignment, powers, estimation })
    }

    pub fn model(&self) -> LinkModel<'_> {
        LinkModel::new(&self.stats, &self.estimation, &self.assignment, &self.powers)
    }

    pub fn num_cpus(&self) -> usize {
        self.deployment.num_cpus()
    }
}

/// Default-model instance with `m` APs, `k` users, `n` antennas, `q` CPUs.
///
/// Panics if the drop cannot be built, which only happens for invalid sizes.
pub fn random_instance(m: usize, k: usize, n: usize, q: usize, tau_p: usize, seed: u64) -> RandomInstance {
    let scenario = ScenarioConfig {
        num_aps: m,
        num_users: k,
        num_antennas: n,
        cpu_positions: cpu_layout(q),
        ..Default::default()
    };
    RandomInstance::generate(&scenario, &LargeScaleModelConfig::default(), &PowerConfig::default(), tau_p, seed)
        .expect("valid instance parameters")
}
