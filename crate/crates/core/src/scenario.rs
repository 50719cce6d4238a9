//! Network geometry: AP, UE and CPU placement on a square with wrap-around.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// A point in the plane, in meters.
pub type Point = [f64; 2];

/// CPU positions used by the reference four-CPU layout.
pub const QUADRANT_CPUS: [Point; 4] = [[250.0, 250.0], [250.0, -250.0], [-250.0, -250.0], [-250.0, 250.0]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Side length of the square deployment area, centered at the origin.
    pub area_side: f64,
    pub num_aps: usize,
    pub num_users: usize,
    /// Antennas per AP.
    pub num_antennas: usize,
    pub cpu_positions: Vec<Point>,
    /// Seed for standalone generation. Experiments derive one per drop.
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area_side: 1000.0,
            num_aps: 100,
            num_users: 20,
            num_antennas: 2,
            cpu_positions: QUADRANT_CPUS.to_vec(),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.area_side > 0.0 && self.area_side.is_finite()) {
            return Err(Error::config(format!("area_side must be positive, got {}", self.area_side)));
        }
        if self.num_aps == 0 || self.num_users == 0 || self.num_antennas == 0 {
            return Err(Error::config("num_aps, num_users and num_antennas must all be at least 1"));
        }
        if self.cpu_positions.is_empty() {
            return Err(Error::config("at least one CPU position is required"));
        }
        if self.cpu_positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::config("CPU positions must be finite"));
        }
        Ok(())
    }

    pub fn num_cpus(&self) -> usize {
        self.cpu_positions.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub area_side: f64,
    pub ap_positions: Vec<Point>,
    pub ue_positions: Vec<Point>,
    pub cpu_positions: Vec<Point>,
    /// `cpu_map[q]` lists the APs controlled by CPU `q`, ascending.
    pub cpu_map: Vec<Vec<usize>>,
    /// Controlling CPU of every AP.
    pub ap_cpu: Vec<usize>,
}

impl Deployment {
    /// Builds a deployment from explicit positions, assigning APs to CPUs.
    pub fn from_positions(
        area_side: f64,
        ap_positions: Vec<Point>,
        ue_positions: Vec<Point>,
        cpu_positions: Vec<Point>,
    ) -> Result<Self> {
        if cpu_positions.is_empty() {
            return Err(Error::config("at least one CPU position is required"));
        }
        let ap_cpu: Vec<usize> = ap_positions
            .iter()
            .map(|ap| closest(ap, &cpu_positions, area_side))
            .collect();
        let mut cpu_map = vec![Vec::new(); cpu_positions.len()];
        for (m, &q) in ap_cpu.iter().enumerate() {
            cpu_map[q].push(m);
        }
        Ok(Self { area_side, ap_positions, ue_positions, cpu_positions, cpu_map, ap_cpu })
    }

    pub fn num_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn num_users(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn num_cpus(&self) -> usize {
        self.cpu_positions.len()
    }

    pub fn ap_ue_distance(&self, m: usize, k: usize) -> f64 {
        wrap_distance(self.ap_positions[m], self.ue_positions[k], self.area_side)
    }
}

/// Index of the position closest to `p` under wrap-around; ties go to the lowest index.
fn closest(p: &Point, candidates: &[Point], side: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (q, c) in candidates.iter().enumerate() {
        let d = wrap_distance(*p, *c, side);
        if d < best_d {
            best = q;
            best_d = d;
        }
    }
    best
}

/// Generates a deployment from `config.seed`.
pub fn generate_deployment(config: &ScenarioConfig) -> Result<Deployment> {
    let mut rng = crate::rng::batch_stream(config.seed, 0);
    generate_deployment_with(config, &mut rng)
}

/// Generates a deployment drawing positions from `rng`.
pub fn generate_deployment_with(config: &ScenarioConfig, rng: &mut SimRng) -> Result<Deployment> {
    config.validate()?;
    let half = config.area_side / 2.0;
    let mut draw = |count: usize| -> Vec<Point> {
        (0..count)
            .map(|_| [rng.random_range(-half..half), rng.random_range(-half..half)])
            .collect()
    };
    let aps = draw(config.num_aps);
    let ues = draw(config.num_users);
    Deployment::from_positions(config.area_side, aps, ues, config.cpu_positions.clone())
}

/// Shortest displacement from `a` to the wrapped copies of `b`.
pub fn wrap_offset(a: Point, b: Point, side: f64) -> Point {
    let mut best = [b[0] - a[0], b[1] - a[1]];
    let mut best_d2 = f64::INFINITY;
    for sx in [-1.0, 0.0, 1.0] {
        for sy in [-1.0, 0.0, 1.0] {
            let dx = b[0] + sx * side - a[0];
            let dy = b[1] + sy * side - a[1];
            let d2 = dx * dx + dy * dy;
            if d2 < best_d2 {
                best_d2 = d2;
                best = [dx, dy];
            }
        }
    }
    best
}

/// Distance between `a` and the nearest of the nine translated copies of `b`.
pub fn wrap_distance(a: Point, b: Point, side: f64) -> f64 {
    let [dx, dy] = wrap_offset(a, b, side);
    dx.hypot(dy)
}
