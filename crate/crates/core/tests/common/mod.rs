#![allow(dead_code)]

use std::collections::BTreeSet;

use cellfree::clustering::{
    cluster_fixed, cluster_legacy_largest_lsf, cluster_lsf_threshold, cluster_power, coherent_groups, form_clusters,
    order_cpus, Algorithm, ClusteringParams, ServingStructure, ThresholdMode, TransmissionMode,
};
use cellfree::instance::RandomInstance;
use cellfree::linalg::{frobenius_rel, CMatrix, C64};
use cellfree::spectral_efficiency::{
    apply_sic_order, compute_terms, reference, sinr_mixed, user_rates, FrameConfig, SicOrder,
};
use cellfree::channel::sample_channel;
use cellfree::pilot::{psi_matrix, simulate_pilot_phase};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Log-uniform β in [1e-14, 1e-8]; with `ties`, drawn from only four levels.
pub fn random_beta(rng: &mut impl Rng, m: usize, ties: bool) -> Vec<f64> {
    (0..m)
        .map(|_| {
            if ties {
                10f64.powi(-8 - rng.random_range(0..4))
            } else {
                10f64.powf(rng.random_range(-14.0..-8.0))
            }
        })
        .collect()
}

/// Random AP-to-CPU map where every CPU controls at least one AP.
pub fn random_cpu_map(rng: &mut impl Rng, m: usize, q: usize) -> (Vec<Vec<usize>>, Vec<usize>) {
    let mut ap_cpu: Vec<usize> = (0..m).map(|i| if i < q { i } else { rng.random_range(0..q) }).collect();
    ap_cpu.shuffle(rng);
    let mut cpu_map = vec![Vec::new(); q];
    for (ap, &c) in ap_cpu.iter().enumerate() {
        cpu_map[c].push(ap);
    }
    (cpu_map, ap_cpu)
}

pub struct ClusteringCase {
    pub beta: Vec<f64>,
    pub cpu_map: Vec<Vec<usize>>,
    pub ap_cpu: Vec<usize>,
}

pub fn clustering_case(seed: u64, ties: bool) -> ClusteringCase {
    let mut r = rng(seed);
    let q = r.random_range(1..=4);
    let m = r.random_range(q..=24);
    let beta = random_beta(&mut r, m, ties);
    let (cpu_map, ap_cpu) = random_cpu_map(&mut r, m, q);
    ClusteringCase { beta, cpu_map, ap_cpu }
}

fn set(v: &[usize]) -> BTreeSet<usize> {
    v.iter().copied().collect()
}

/// APs sorted strongest first, ties by lower index.
fn strongest_first(beta: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..beta.len()).collect();
    idx.sort_by(|&a, &b| beta[b].partial_cmp(&beta[a]).unwrap().then(a.cmp(&b)));
    idx
}

/// Single-pool threshold rule: every AP with β ≥ Δ, else the strongest AP.
pub fn pooled_threshold(beta: &[f64], delta: f64) -> BTreeSet<usize> {
    let s: BTreeSet<usize> = (0..beta.len()).filter(|&m| beta[m] >= delta).collect();
    if s.is_empty() {
        return BTreeSet::from([strongest_first(beta)[0]]);
    }
    s
}

/// Single-pool fixed-size rule: the n strongest APs.
pub fn pooled_fixed(beta: &[f64], n: usize) -> BTreeSet<usize> {
    strongest_first(beta).into_iter().take(n).collect()
}

/// Single-pool power rule: fewest strongest APs holding a δ share of the total β.
pub fn pooled_power(beta: &[f64], delta: f64) -> BTreeSet<usize> {
    let order = strongest_first(beta);
    let total: f64 = order.iter().map(|&m| beta[m]).sum();
    let mut acc = 0.0;
    let mut out = BTreeSet::new();
    for m in order {
        out.insert(m);
        acc += beta[m];
        if acc >= delta * total {
            break;
        }
    }
    out
}

/// Checks that the multi-CPU rules with every CPU admitted reduce to the pooled rules.
pub fn check_reductions(case: &ClusteringCase, r: &mut impl Rng) -> Result<(), String> {
    let q = case.cpu_map.len();
    let b = &case.beta;
    let delta = 10f64.powf(r.random_range(-14.0..-7.5));
    let n = r.random_range(1..=b.len());
    let frac = r.random_range(0.05..=1.0);
    let thr = set(&cluster_lsf_threshold(b, &case.cpu_map, q, delta).map_err(|e| e.to_string())?);
    if thr != pooled_threshold(b, delta) {
        return Err(format!("threshold Δ={delta:e}: {thr:?} vs {:?}", pooled_threshold(b, delta)));
    }
    let fixed = set(&cluster_fixed(b, &case.cpu_map, q, n).map_err(|e| e.to_string())?);
    if fixed != pooled_fixed(b, n) || fixed != set(&cluster_legacy_largest_lsf(b, n)) {
        return Err(format!("fixed n={n}: {fixed:?} vs {:?}", pooled_fixed(b, n)));
    }
    let pow = set(&cluster_power(b, &case.cpu_map, q, frac).map_err(|e| e.to_string())?);
    if pow != pooled_power(b, frac) {
        return Err(format!("power δ={frac}: {pow:?} vs {:?}", pooled_power(b, frac)));
    }
    Ok(())
}

/// Coherent groups are disjoint, cover the cluster, and each sits under one CPU.
pub fn check_partition(case: &ClusteringCase, r: &mut impl Rng) -> Result<(), String> {
    let size = r.random_range(1..=case.beta.len());
    let mut cluster: Vec<usize> = (0..case.beta.len()).collect();
    cluster.shuffle(r);
    cluster.truncate(size);
    let groups = coherent_groups(&cluster, &case.ap_cpu, case.cpu_map.len());
    let mut seen = BTreeSet::new();
    let mut cpus = BTreeSet::new();
    for g in &groups {
        let q = g.cpu.ok_or("group without CPU")?;
        if g.aps.is_empty() || !cpus.insert(q) {
            return Err(format!("empty or repeated group for CPU {q}"));
        }
        for &m in &g.aps {
            if case.ap_cpu[m] != q || !seen.insert(m) {
                return Err(format!("AP {m} misplaced in group of CPU {q}"));
            }
        }
    }
    if seen != set(&cluster) {
        return Err("groups do not cover the cluster".into());
    }
    let clusters = vec![cluster];
    for mode in TransmissionMode::ALL {
        let s = ServingStructure::build(clusters.clone(), mode, &case.ap_cpu, case.cpu_map.len())
            .map_err(|e| e.to_string())?;
        let covered: BTreeSet<usize> = s.groups[0].iter().flat_map(|g| g.aps.iter().copied()).collect();
        let total: usize = s.groups[0].iter().map(|g| g.aps.len()).sum();
        if covered != set(&clusters[0]) || total != clusters[0].len() {
            return Err(format!("{} groups do not partition the cluster", mode.name()));
        }
    }
    Ok(())
}

fn subset(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> bool {
    a.is_subset(b)
}

/// Larger δ and n_ap grow the cluster; larger Δ shrinks it.
pub fn check_monotonicity(case: &ClusteringCase, r: &mut impl Rng) -> Result<(), String> {
    let q = case.cpu_map.len();
    let n_cpu = r.random_range(1..=q);
    let b = &case.beta;
    let map = &case.cpu_map;
    let err = |e: cellfree::Error| e.to_string();

    let (mut f1, mut f2) = (r.random_range(0.01..=1.0), r.random_range(0.01..=1.0));
    if f1 > f2 {
        std::mem::swap(&mut f1, &mut f2);
    }
    let (p1, p2) = (set(&cluster_power(b, map, n_cpu, f1).map_err(err)?), set(&cluster_power(b, map, n_cpu, f2).map_err(err)?));
    if !subset(&p1, &p2) {
        return Err(format!("power δ {f1} → {f2}: {p1:?} ⊄ {p2:?}"));
    }

    let (mut d1, mut d2) = (10f64.powf(r.random_range(-14.0..-7.5)), 10f64.powf(r.random_range(-14.0..-7.5)));
    if d1 > d2 {
        std::mem::swap(&mut d1, &mut d2);
    }
    let t1 = set(&cluster_lsf_threshold(b, map, n_cpu, d1).map_err(err)?);
    let t2 = set(&cluster_lsf_threshold(b, map, n_cpu, d2).map_err(err)?);
    if !subset(&t2, &t1) {
        return Err(format!("threshold Δ {d1:e} → {d2:e}: {t2:?} ⊄ {t1:?}"));
    }

    let (mut n1, mut n2) = (r.random_range(1..=b.len()), r.random_range(1..=b.len()));
    if n1 > n2 {
        std::mem::swap(&mut n1, &mut n2);
    }
    let x1 = set(&cluster_fixed(b, map, n_cpu, n1).map_err(err)?);
    let x2 = set(&cluster_fixed(b, map, n_cpu, n2).map_err(err)?);
    if !subset(&x1, &x2) {
        return Err(format!("fixed n {n1} → {n2}: {x1:?} ⊄ {x2:?}"));
    }
    Ok(())
}

/// Every algorithm serves every user, including at degenerate parameters.
pub fn check_nonempty(case: &ClusteringCase, r: &mut impl Rng) -> Result<(), String> {
    let q = case.cpu_map.len();
    let columns = vec![case.beta.clone(); 3];
    let algorithms = [Algorithm::LegacyLargestLsf, Algorithm::LsfThreshold, Algorithm::FixedAps, Algorithm::PowerFraction];
    for algorithm in algorithms {
        let params = ClusteringParams {
            algorithm,
            n_cpu: r.random_range(1..=q),
            delta_threshold: [0.0, 1e-3, 1.0, 1e6][r.random_range(0..4)],
            threshold_mode: ThresholdMode::RawLinear,
            n_ap: r.random_range(1..=case.beta.len()),
            power_fraction: [1e-9, 0.5, 1.0][r.random_range(0..3)],
            legacy_cluster_size: r.random_range(1..=case.beta.len()),
        };
        let clusters = form_clusters(&columns, &case.cpu_map, &params, 1.0).map_err(|e| e.to_string())?;
        if clusters.iter().any(|c| c.is_empty() || c.iter().any(|&m| m >= case.beta.len())) {
            return Err(format!("{algorithm:?} produced an empty or invalid cluster"));
        }
    }
    let best = strongest_first(&case.beta)[0];
    let above_all = cluster_lsf_threshold(&case.beta, &case.cpu_map, q, f64::INFINITY).map_err(|e| e.to_string())?;
    if above_all != vec![best] {
        return Err(format!("fallback served {above_all:?} instead of AP {best}"));
    }
    Ok(())
}

/// With heavily tied β, outputs follow the lowest-index rule and repeat exactly.
pub fn check_ties(case: &ClusteringCase, r: &mut impl Rng) -> Result<(), String> {
    let q = case.cpu_map.len();
    let b = &case.beta;
    let n = r.random_range(1..=b.len());
    let legacy = cluster_legacy_largest_lsf(b, n);
    if set(&legacy) != pooled_fixed(b, n) {
        return Err(format!("legacy n={n}: {legacy:?} vs {:?}", pooled_fixed(b, n)));
    }

    let best: Vec<f64> = case.cpu_map.iter().map(|aps| aps.iter().map(|&m| b[m]).fold(f64::MIN, f64::max)).collect();
    let mut expected: Vec<usize> = (0..q).collect();
    expected.sort_by(|&x, &y| best[y].partial_cmp(&best[x]).unwrap().then(x.cmp(&y)));
    let order = order_cpus(b, &case.cpu_map).map_err(|e| e.to_string())?;
    if order != expected {
        return Err(format!("CPU order {order:?} vs {expected:?}"));
    }

    let n_cpu = r.random_range(1..=q);
    let allowed: Vec<usize> = expected[..n_cpu].iter().flat_map(|&c| case.cpu_map[c].iter().copied()).collect();
    let mut masked = vec![f64::NEG_INFINITY; b.len()];
    for &m in &allowed {
        masked[m] = b[m];
    }
    let want = pooled_fixed(&masked, n.min(allowed.len()));
    let got = cluster_fixed(b, &case.cpu_map, n_cpu, n).map_err(|e| e.to_string())?;
    if set(&got) != want {
        return Err(format!("fixed with ties: {got:?} vs {want:?}"));
    }
    let frac = r.random_range(0.05..=1.0);
    let runs: Vec<Vec<usize>> = (0..2)
        .map(|_| cluster_power(b, &case.cpu_map, n_cpu, frac))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    if runs[0] != runs[1] {
        return Err("power clustering is not repeatable".into());
    }
    Ok(())
}

/// Largest relative gaps between the mixed closed form and the two classical
/// factorizations: (single-CPU clusters vs coherent, one AP per CPU vs non-coherent).
pub fn special_case_errors(inst: &RandomInstance, r: &mut impl Rng) -> Result<(f64, f64), String> {
    let err = |e: cellfree::Error| e.to_string();
    let model = inst.model();
    let noise = inst.stats.noise_power();
    let k_count = inst.stats.num_users();
    let cpu_map = &inst.deployment.cpu_map;
    let q = inst.num_cpus();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);

    // One CPU per user: a random non-empty subset of that CPU's APs.
    let single_cpu: Vec<Vec<usize>> = (0..k_count)
        .map(|_| {
            let nonempty: Vec<&Vec<usize>> = cpu_map.iter().filter(|a| !a.is_empty()).collect();
            let mut aps = nonempty[r.random_range(0..nonempty.len())].clone();
            aps.shuffle(r);
            aps.truncate(r.random_range(1..=aps.len()));
            aps.sort_unstable();
            aps
        })
        .collect();
    let serving = ServingStructure::build(single_cpu.clone(), TransmissionMode::Mixed, &inst.ap_cpu, q).map_err(err)?;
    let terms = compute_terms(&serving, &model).map_err(err)?;
    let mut coherent_gap: f64 = 0.0;
    for k in 0..k_count {
        assert_eq!(terms.desired[k].len(), 1);
        let mixed = sinr_mixed(&terms, k, 0, noise).map_err(err)?;
        let direct = reference::coherent_sinr(&model, &single_cpu, k, noise).map_err(err)?;
        coherent_gap = coherent_gap.max(rel(mixed, direct));
    }

    // At most one AP per CPU: every group is a single AP.
    let one_per_cpu: Vec<Vec<usize>> = (0..k_count)
        .map(|_| {
            let mut aps = Vec::new();
            for a in cpu_map.iter().filter(|a| !a.is_empty()) {
                if r.random_bool(0.7) {
                    aps.push(a[r.random_range(0..a.len())]);
                }
            }
            if aps.is_empty() {
                aps.push(r.random_range(0..inst.stats.num_aps()));
            }
            aps.sort_unstable();
            aps
        })
        .collect();
    let mut serving =
        ServingStructure::build(one_per_cpu.clone(), TransmissionMode::Mixed, &inst.ap_cpu, q).map_err(err)?;
    let mut terms = compute_terms(&serving, &model).map_err(err)?;
    apply_sic_order(&mut serving, &mut terms, SicOrder::DescendingDesired);
    let mut singleton_gap: f64 = 0.0;
    for k in 0..k_count {
        let order: Vec<usize> = serving.groups[k].iter().map(|g| g.aps[0]).collect();
        let direct = reference::non_coherent_sinrs(&model, &one_per_cpu, k, &order, noise).map_err(err)?;
        for (c, want) in direct.iter().enumerate() {
            singleton_gap = singleton_gap.max(rel(sinr_mixed(&terms, k, c, noise).map_err(err)?, *want));
        }
    }
    Ok((coherent_gap, singleton_gap))
}

/// With one serving AP per user, the three modes give bit-identical user rates.
pub fn single_ap_modes_identical(inst: &RandomInstance) -> Result<bool, String> {
    let err = |e: cellfree::Error| e.to_string();
    let model = inst.model();
    let noise = inst.stats.noise_power();
    let clusters: Vec<Vec<usize>> =
        (0..inst.stats.num_users()).map(|k| cluster_legacy_largest_lsf(&inst.stats.beta_column(k), 1)).collect();
    let frame = FrameConfig { tau_c: 200, tau_p: inst.assignment.tau_p() };
    let rates = TransmissionMode::ALL
        .iter()
        .map(|&mode| {
            let mut s = ServingStructure::build(clusters.clone(), mode, &inst.ap_cpu, inst.num_cpus()).map_err(err)?;
            let mut t = compute_terms(&s, &model).map_err(err)?;
            apply_sic_order(&mut s, &mut t, SicOrder::DescendingDesired);
            Ok(user_rates(&t, &frame, noise).map_err(err)?.user_rate)
        })
        .collect::<Result<Vec<Vec<f64>>, String>>()?;
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    Ok(rates.iter().all(|r| bits(r) == bits(&rates[0])))
}

/// Sample statistics of the MMSE estimate on every link of a drop.
pub struct EstimatorStats {
    /// ‖Ĉov(Ĥ) − p τ R Ψ⁻¹ R‖_F / ‖p τ R Ψ⁻¹ R‖_F, worst link.
    pub covariance_error: f64,
    /// ‖Ĉov(Ĥ, H − Ĥ)‖_F / ‖R‖_F, worst link.
    pub cross_covariance: f64,
    /// ‖C + p τ R Ψ⁻¹ R − R‖_F / ‖R‖_F, worst link.
    pub decomposition_error: f64,
}

pub fn estimator_statistics(inst: &RandomInstance, num_samples: usize, seed: u64) -> EstimatorStats {
    let stats = &inst.stats;
    let (m_count, k_count, n) = (stats.num_aps(), stats.num_users(), stats.num_antennas());
    let zero = CMatrix::zeros(n, n);
    let mut est_cov = vec![zero.clone(); m_count * k_count];
    let mut cross = vec![zero.clone(); m_count * k_count];
    let mut r = rng(seed);
    for _ in 0..num_samples {
        let h = sample_channel(stats, &mut r);
        let y = simulate_pilot_phase(&h, &inst.assignment, &inst.powers, stats.noise_power(), &mut r);
        for m in 0..m_count {
            for k in 0..k_count {
                let est = inst.estimation.estimate(&y, m, k, &inst.assignment);
                let e = h.get(m, k) - &est;
                est_cov[m * k_count + k] += &est * est.adjoint();
                cross[m * k_count + k] += &est * e.adjoint();
            }
        }
    }
    let scale = C64::new(1.0 / num_samples as f64, 0.0);
    let tau_p = inst.assignment.tau_p() as f64;
    let mut out = EstimatorStats { covariance_error: 0.0, cross_covariance: 0.0, decomposition_error: 0.0 };
    for m in 0..m_count {
        for k in 0..k_count {
            let rmat = stats.r(m, k);
            let psi = psi_matrix(m, inst.assignment.pilot(k), stats, &inst.assignment, &inst.powers);
            let psi_inv = psi.try_inverse().expect("Ψ is invertible");
            let want = rmat * psi_inv * rmat * C64::new(inst.powers.pilot[k] * tau_p, 0.0);
            let idx = m * k_count + k;
            out.covariance_error = out.covariance_error.max(frobenius_rel(&(&est_cov[idx] * scale), &want));
            out.cross_covariance = out.cross_covariance.max((&cross[idx] * scale).norm() / rmat.norm());
            let sum = inst.estimation.error_covariance(stats, m, k) + inst.estimation.estimate_covariance(stats, m, k);
            out.decomposition_error = out.decomposition_error.max(frobenius_rel(&sum, rmat));
        }
    }
    out
}
