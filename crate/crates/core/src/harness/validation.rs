//! Closed form versus Monte Carlo oracle on random instances.

use serde::{Deserialize, Serialize};

use super::OracleCheck;
use crate::clustering::{cluster_legacy_largest_lsf, ServingStructure, TransmissionMode};
use crate::error::Result;
use crate::instance::random_instance;
use crate::rng::batch_stream;
use crate::spectral_efficiency::{
    apply_sic_order, compute_terms, mc_oracle, user_rates, Estimate, FrameConfig, OracleEstimate, RateResult, SETerms,
    SicOrder,
};

/// Relative tolerance between closed form and oracle.
pub const REL_TOL: f64 = 0.02;
/// Alternative tolerance in oracle standard errors.
pub const NUM_STD_ERRORS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermCheck {
    /// e.g. `D[2][1]`, `E[0]`, `sinr[3][0]`
    pub term: String,
    pub closed_form: f64,
    pub oracle: f64,
    pub std_error: f64,
    pub relative_error: f64,
    pub pass: bool,
}

fn check(term: String, closed: f64, est: &Estimate) -> TermCheck {
    TermCheck {
        term,
        closed_form: closed,
        oracle: est.value,
        std_error: est.std_error,
        relative_error: est.relative_error(closed),
        pass: est.agrees_with(closed, REL_TOL, NUM_STD_ERRORS),
    }
}

/// Pairs every closed-form D, E, F and SINR with its oracle estimate.
pub fn term_checks(terms: &SETerms, rates: &RateResult, est: &OracleEstimate) -> Vec<TermCheck> {
    let mut rows = Vec::new();
    for k in 0..terms.num_users() {
        for (c, d) in terms.desired[k].iter().enumerate() {
            rows.push(check(format!("D[{k}][{c}]"), *d, &est.desired[k][c]));
        }
        rows.push(check(format!("E[{k}]"), terms.interference[k], &est.interference[k]));
        rows.push(check(format!("F[{k}]"), terms.contamination[k], &est.contamination[k]));
        for (c, g) in rates.sinr[k].iter().enumerate() {
            rows.push(check(format!("sinr[{k}][{c}]"), *g, &est.sinr[k][c]));
        }
    }
    rows
}

pub fn compare_with_oracle(terms: &SETerms, rates: &RateResult, est: &OracleEstimate) -> OracleCheck {
    let rows = term_checks(terms, rates, est);
    OracleCheck {
        num_samples: est.num_samples,
        max_relative_error: rows.iter().map(|r| r.relative_error).fold(0.0, f64::max),
        within_tolerance: rows.iter().all(|r| r.pass),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceValidation {
    pub num_aps: usize,
    pub num_users: usize,
    pub num_antennas: usize,
    pub num_cpus: usize,
    pub tau_p: usize,
    pub seed: u64,
    pub rows: Vec<TermCheck>,
}

impl InstanceValidation {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn max_relative_error(&self) -> f64 {
        self.rows.iter().map(|r| r.relative_error).fold(0.0, f64::max)
    }
}

/// Builds a random drop with mixed service and compares closed form and oracle.
///
/// Each user is served by its strongest APs, with a cluster size drawn
/// uniformly from `2..=M/2`, so clusters usually span several CPUs.
pub fn validate_instance(m: usize, k: usize, n: usize, q: usize, tau_p: usize, seed: u64, num_samples: usize) -> Result<InstanceValidation> {
    use rand::Rng;
    let inst = random_instance(m, k, n, q, tau_p, seed);
    let mut rng = batch_stream(seed, 3);
    let upper = (m / 2).max(2).min(m);
    let clusters: Vec<Vec<usize>> = (0..k)
        .map(|user| cluster_legacy_largest_lsf(&inst.stats.beta_column(user), rng.random_range(2.min(m)..=upper)))
        .collect();
    let mut serving = ServingStructure::build(clusters, TransmissionMode::Mixed, &inst.ap_cpu, inst.num_cpus())?;
    let model = inst.model();
    let mut terms = compute_terms(&serving, &model)?;
    apply_sic_order(&mut serving, &mut terms, SicOrder::DescendingDesired);
    let frame = FrameConfig { tau_c: 200, tau_p };
    let rates = user_rates(&terms, &frame, inst.stats.noise_power())?;
    let est = mc_oracle(&serving, &model, num_samples, seed ^ 0x5eed)?;
    Ok(InstanceValidation {
        num_aps: m,
        num_users: k,
        num_antennas: n,
        num_cpus: q,
        tau_p,
        seed,
        rows: term_checks(&terms, &rates, &est),
    })
}
