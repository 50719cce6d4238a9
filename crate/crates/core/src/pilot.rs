//! Uplink pilot phase and MMSE channel estimation.
//!
//! Pilots are mutually orthogonal, so they are represented only by index: the
//! normalized inner product of two pilots is 1 when the indices match and 0
//! otherwise, and projecting the received pilot matrix onto pilot `t` keeps
//! exactly the users assigned to `t`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, ChannelStatistics};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotAssignment {
    tau_p: usize,
    pilot_of: Vec<usize>,
}

impl PilotAssignment {
    /// Pilot indices are zero-based, in `0..tau_p`.
    pub fn new(tau_p: usize, pilot_of: Vec<usize>) -> Result<Self> {
        if tau_p == 0 {
            return Err(Error::config("at least one pilot is required"));
        }
        if let Some(&t) = pilot_of.iter().find(|&&t| t >= tau_p) {
            return Err(Error::config(format!("pilot index {t} out of range for tau_p = {tau_p}")));
        }
        Ok(Self { tau_p, pilot_of })
    }

    pub fn tau_p(&self) -> usize {
        self.tau_p
    }

    pub fn num_users(&self) -> usize {
        self.pilot_of.len()
    }

    pub fn pilot(&self, k: usize) -> usize {
        self.pilot_of[k]
    }

    /// Users transmitting pilot `t`.
    pub fn users_on(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.pilot_of.iter().enumerate().filter(move |(_, &p)| p == t).map(|(i, _)| i)
    }

    /// P_k: users sharing user `k`'s pilot, including `k`.
    pub fn copilots(&self, k: usize) -> Vec<usize> {
        self.users_on(self.pilot_of[k]).collect()
    }

    pub fn share_pilot(&self, i: usize, k: usize) -> bool {
        self.pilot_of[i] == self.pilot_of[k]
    }
}

/// Each user picks a pilot uniformly at random; collisions are allowed.
pub fn assign_pilots<R: Rng + ?Sized>(num_users: usize, tau_p: usize, rng: &mut R) -> Result<PilotAssignment> {
    if tau_p == 0 {
        return Err(Error::config("at least one pilot is required"));
    }
    let pilot_of = (0..num_users).map(|_| rng.random_range(0..tau_p)).collect();
    PilotAssignment::new(tau_p, pilot_of)
}

/// What to do when the links of an AP request more than its power budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerBudgetMode {
    Error,
    Rescale,
    #[default]
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerConfig {
    /// Pilot power per user, W.
    pub pilot_power: f64,
    /// Data power per AP-user link, W.
    pub data_power: f64,
    /// Per-AP transmit budget, W.
    pub ap_power_budget: f64,
    pub budget_mode: PowerBudgetMode,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self { pilot_power: 0.2, data_power: 0.1, ap_power_budget: 1.0, budget_mode: PowerBudgetMode::Ignore }
    }
}

impl PowerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pilot_power >= 0.0 && self.data_power >= 0.0 && self.ap_power_budget >= 0.0) {
            return Err(Error::config("powers must be non-negative"));
        }
        Ok(())
    }
}

/// Per-user pilot powers and per-link data powers ρ_{m,k} (indexed `m * K + k`).
#[derive(Debug, Clone, PartialEq)]
pub struct Powers {
    num_users: usize,
    pub pilot: Vec<f64>,
    pub data: Vec<f64>,
}

impl Powers {
    pub fn uniform(config: &PowerConfig, num_aps: usize, num_users: usize) -> Self {
        Self {
            num_users,
            pilot: vec![config.pilot_power; num_users],
            data: vec![config.data_power; num_aps * num_users],
        }
    }

    pub fn new(num_users: usize, pilot: Vec<f64>, data: Vec<f64>) -> Result<Self> {
        if pilot.len() != num_users || !data.len().is_multiple_of(num_users.max(1)) {
            return Err(Error::config("power vectors do not match the number of users"));
        }
        if pilot.iter().chain(&data).any(|p| !(*p >= 0.0)) {
            return Err(Error::config("powers must be non-negative"));
        }
        Ok(Self { num_users, pilot, data })
    }

    pub fn rho(&self, m: usize, k: usize) -> f64 {
        self.data[m * self.num_users + k]
    }

    pub fn set_rho(&mut self, m: usize, k: usize, value: f64) {
        self.data[m * self.num_users + k] = value;
    }

    /// Applies the per-AP budget Σ_{k ∈ U_m} ρ_{m,k} ≤ P_max.
    pub fn enforce_budget(&mut self, served: &[Vec<usize>], budget: f64, mode: PowerBudgetMode) -> Result<()> {
        for (m, users) in served.iter().enumerate() {
            let total: f64 = users.iter().map(|&k| self.rho(m, k)).sum();
            if total <= budget * (1.0 + 1e-12) {
                continue;
            }
            match mode {
                PowerBudgetMode::Ignore => {}
                PowerBudgetMode::Error => {
                    return Err(Error::config(format!(
                        "AP {m} requests {total} W, above its {budget} W budget"
                    )))
                }
                PowerBudgetMode::Rescale => {
                    let scale = budget / total;
                    for &k in users {
                        let rho = self.rho(m, k);
                        self.set_rho(m, k, rho * scale);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Ψ_{m,t} = Σ_{i: t_i = t} τ_p p_i R_{m,i} + σ² I.
pub fn psi_matrix(m: usize, t: usize, stats: &ChannelStatistics, assignment: &PilotAssignment, powers: &Powers) -> CMatrix {
    let n = stats.num_antennas();
    let tau = assignment.tau_p() as f64;
    let mut psi = CMatrix::identity(n, n) * C64::new(stats.noise_power(), 0.0);
    for i in assignment.users_on(t) {
        psi += stats.r(m, i) * C64::new(tau * powers.pilot[i], 0.0);
    }
    psi
}

/// Projected pilot observations y̌_{m,t}, indexed `m * tau_p + t`.
#[derive(Debug, Clone)]
pub struct PilotObservations {
    tau_p: usize,
    pub y: Vec<CVector>,
}

impl PilotObservations {
    pub fn get(&self, m: usize, t: usize) -> &CVector {
        &self.y[m * self.tau_p + t]
    }
}

/// y̌_{m,t} = Σ_{i: t_i = t} √(p_i τ_p) H_{m,i} + n with n ~ CN(0, σ² I).
pub fn simulate_pilot_phase<R: Rng + ?Sized>(
    realization: &ChannelRealization,
    assignment: &PilotAssignment,
    powers: &Powers,
    noise_power: f64,
    rng: &mut R,
) -> PilotObservations {
    let k_count = realization.num_users();
    let m_count = realization.h.len() / k_count;
    let n = realization.h[0].len();
    let tau_p = assignment.tau_p();
    let noise_amp = noise_power.sqrt();
    let mut y = Vec::with_capacity(m_count * tau_p);
    for m in 0..m_count {
        for t in 0..tau_p {
            let mut obs = CVector::from_fn(n, |_, _| linalg::complex_normal(rng) * noise_amp);
            for i in assignment.users_on(t) {
                obs += realization.get(m, i) * C64::new((powers.pilot[i] * tau_p as f64).sqrt(), 0.0);
            }
            y.push(obs);
        }
    }
    PilotObservations { tau_p, y }
}

/// Cached estimation quantities for one drop.
///
/// Holds Ψ^{-1} per (AP, pilot), the MMSE filter √(p_k τ_p) R Ψ^{-1} per link,
/// and tr(R Ψ^{-1} R) per link. Read-only once built.
#[derive(Debug, Clone)]
pub struct EstimationStatistics {
    num_users: usize,
    tau_p: usize,
    psi_inv: Vec<CMatrix>,
    filters: Vec<CMatrix>,
    gain_trace: Vec<f64>,
    pilot_power: Vec<f64>,
}

impl EstimationStatistics {
    pub fn new(stats: &ChannelStatistics, assignment: &PilotAssignment, powers: &Powers) -> Result<Self> {
        let (m_count, k_count) = (stats.num_aps(), stats.num_users());
        if assignment.num_users() != k_count || powers.pilot.len() != k_count {
            return Err(Error::config("pilot assignment and powers must cover every user"));
        }
        let tau_p = assignment.tau_p();
        let mut psi_inv = Vec::with_capacity(m_count * tau_p);
        for m in 0..m_count {
            for t in 0..tau_p {
                psi_inv.push(linalg::hpd_inverse(&psi_matrix(m, t, stats, assignment, powers))?);
            }
        }
        let mut filters = Vec::with_capacity(m_count * k_count);
        let mut gain_trace = Vec::with_capacity(m_count * k_count);
        for m in 0..m_count {
            for k in 0..k_count {
                let r = stats.r(m, k);
                let r_psi = r * &psi_inv[m * tau_p + assignment.pilot(k)];
                gain_trace.push(linalg::trace_product(&r_psi, r).re);
                filters.push(r_psi * C64::new((powers.pilot[k] * tau_p as f64).sqrt(), 0.0));
            }
        }
        Ok(Self { num_users: k_count, tau_p, psi_inv, filters, gain_trace, pilot_power: powers.pilot.clone() })
    }

    pub fn tau_p(&self) -> usize {
        self.tau_p
    }

    pub fn psi_inv(&self, m: usize, t: usize) -> &CMatrix {
        &self.psi_inv[m * self.tau_p + t]
    }

    /// √(p_k τ_p) R_{m,k} Ψ_{m,t_k}^{-1}
    pub fn filter(&self, m: usize, k: usize) -> &CMatrix {
        &self.filters[m * self.num_users + k]
    }

    /// tr(R_{m,k} Ψ_{m,t_k}^{-1} R_{m,k})
    pub fn gain_trace(&self, m: usize, k: usize) -> f64 {
        self.gain_trace[m * self.num_users + k]
    }

    /// E{‖Ĥ_{m,k}‖²} = p_k τ_p tr(R Ψ^{-1} R)
    pub fn estimate_energy(&self, m: usize, k: usize) -> f64 {
        self.pilot_power[k] * self.tau_p as f64 * self.gain_trace(m, k)
    }

    pub fn estimate(&self, observations: &PilotObservations, m: usize, k: usize, assignment: &PilotAssignment) -> CVector {
        self.filter(m, k) * observations.get(m, assignment.pilot(k))
    }

    /// p_k τ_p R Ψ^{-1} R
    pub fn estimate_covariance(&self, stats: &ChannelStatistics, m: usize, k: usize) -> CMatrix {
        let r = stats.r(m, k);
        let scale = (self.pilot_power[k] * self.tau_p as f64).sqrt();
        self.filter(m, k) * r * C64::new(scale, 0.0)
    }

    /// C_{m,k} = R − p_k τ_p R Ψ^{-1} R
    pub fn error_covariance(&self, stats: &ChannelStatistics, m: usize, k: usize) -> CMatrix {
        stats.r(m, k) - self.estimate_covariance(stats, m, k)
    }
}

/// Ĥ_{m,k} = √(p_k τ_p) R_{m,k} Ψ_{m,t_k}^{-1} y̌_{m,t_k}.
pub fn mmse_estimate(
    observations: &PilotObservations,
    m: usize,
    k: usize,
    stats: &ChannelStatistics,
    assignment: &PilotAssignment,
    powers: &Powers,
) -> Result<CVector> {
    let t = assignment.pilot(k);
    let psi_inv = linalg::hpd_inverse(&psi_matrix(m, t, stats, assignment, powers))?;
    let scale = (powers.pilot[k] * assignment.tau_p() as f64).sqrt();
    Ok(stats.r(m, k) * psi_inv * observations.get(m, t) * C64::new(scale, 0.0))
}

/// C_{m,k} = R_{m,k} − p_k τ_p R_{m,k} Ψ_{m,t_k}^{-1} R_{m,k}.
pub fn error_covariance(
    m: usize,
    k: usize,
    stats: &ChannelStatistics,
    assignment: &PilotAssignment,
    powers: &Powers,
) -> Result<CMatrix> {
    let r = stats.r(m, k);
    let psi_inv = linalg::hpd_inverse(&psi_matrix(m, assignment.pilot(k), stats, assignment, powers))?;
    let scale = powers.pilot[k] * assignment.tau_p() as f64;
    Ok(r - r * psi_inv * r * C64::new(scale, 0.0))
}
