use cellfree::clustering::{cluster_legacy_largest_lsf, ServingStructure, TransmissionMode};
use cellfree::harness::run_drop;
use cellfree::instance::{random_instance, RandomInstance};
use cellfree::pilot::EstimationStatistics;
use cellfree::spectral_efficiency::{compute_terms, mc_oracle};
use cellfree::ExperimentConfig;
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn serving(inst: &RandomInstance, size: usize) -> ServingStructure {
    let clusters = (0..inst.stats.num_users())
        .map(|k| cluster_legacy_largest_lsf(&inst.stats.beta_column(k), size))
        .collect();
    ServingStructure::build(clusters, TransmissionMode::Mixed, &inst.ap_cpu, inst.num_cpus()).unwrap()
}

fn closed_form(c: &mut Criterion) {
    let inst = random_instance(40, 10, 2, 4, 10, 0);
    let s = serving(&inst, 10);
    let model = inst.model();
    c.bench_function("compute_terms M=40 K=10 N=2", |b| b.iter(|| compute_terms(black_box(&s), &model).unwrap()));
    c.bench_function("estimation statistics M=40 K=10 N=2", |b| {
        b.iter(|| EstimationStatistics::new(black_box(&inst.stats), &inst.assignment, &inst.powers).unwrap())
    });
}

fn oracle(c: &mut Criterion) {
    let inst = random_instance(8, 3, 2, 2, 2, 0);
    let s = serving(&inst, 4);
    let model = inst.model();
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    group.bench_function("mc_oracle (8,3,2,2) 10^4 samples", |b| b.iter(|| mc_oracle(&s, &model, 10_000, 1).unwrap()));
    group.finish();
}

fn drop_pipeline(c: &mut Criterion) {
    let mut config = ExperimentConfig::default();
    config.clustering.legacy_cluster_size = 10;
    let mut group = c.benchmark_group("run_drop");
    group.sample_size(10);
    group.bench_function("M=100 K=20 N=2 Q=4", |b| b.iter(|| run_drop(black_box(&config), 0).unwrap()));
    group.finish();
}

criterion_group!(benches, closed_form, oracle, drop_pipeline);
criterion_main!(benches);
