//! Direct evaluations of the two classical special cases, written against the
//! per-link quantities rather than the grouped terms.
//!
//! Fully coherent service treats every cluster as one stream; fully
//! non-coherent service gives each AP its own stream, decoded in the given AP
//! order with SIC. Both are used to cross-check the mixed closed form.

use super::LinkModel;
use crate::error::Result;

fn total_power(model: &LinkModel<'_>, clusters: &[Vec<usize>], k: usize) -> Result<f64> {
    let mut e = 0.0;
    for (i, cluster) in clusters.iter().enumerate() {
        for &m in cluster {
            e += model.link_power(m, i, k)?;
        }
    }
    Ok(e)
}

/// SINR of user `k` when all of its APs transmit one symbol coherently.
pub fn coherent_sinr(model: &LinkModel<'_>, clusters: &[Vec<usize>], k: usize, noise_power: f64) -> Result<f64> {
    let amp: f64 = clusters[k].iter().map(|&m| model.desired_amplitude(m, k)).sum::<Result<f64>>()?;
    let desired = amp * amp;
    let mut f = 0.0;
    for i in model.assignment.copilots(k) {
        let mut coherent = num_complex::Complex64::new(0.0, 0.0);
        for &m in &clusters[i] {
            coherent += model.cross_amplitude(m, i, k)?;
        }
        f += coherent.norm_sqr();
    }
    let e = total_power(model, clusters, k)?;
    Ok(desired / (e + f - desired + noise_power))
}

/// SINR chain of user `k` when every AP sends its own symbol, decoded in `order`.
pub fn non_coherent_sinrs(
    model: &LinkModel<'_>,
    clusters: &[Vec<usize>],
    k: usize,
    order: &[usize],
    noise_power: f64,
) -> Result<Vec<f64>> {
    let mut f = 0.0;
    for i in model.assignment.copilots(k) {
        for &m in &clusters[i] {
            f += model.cross_amplitude(m, i, k)?.norm_sqr();
        }
    }
    let e = total_power(model, clusters, k)?;
    let mut decoded = 0.0;
    order
        .iter()
        .map(|&m| {
            let d = model.desired_amplitude(m, k)?.powi(2);
            decoded += d;
            Ok(d / (e + f - decoded + noise_power))
        })
        .collect()
}
