use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use tdcfdr_bench::{ranked_list, scenario};
use tdcfdr_core::montecarlo::run;
use tdcfdr_core::oracle::{exact_true_fdr, AssignmentSpace, Rule};
use tdcfdr_core::{control, count_profile, rank, rollup_peptide_level, ControlPolicy, EstimatorConfig};

fn bench_pipeline(c: &mut Criterion) {
    let mut group = c.benchmark_group("pipeline");
    for n in [1_000usize, 10_000] {
        let list = ranked_list(n);
        let items = list.items().to_vec();
        let policy = ControlPolicy::tdc(0.01, EstimatorConfig::plus_one()).unwrap();
        group.bench_with_input(BenchmarkId::new("rank", n), &items, |b, items| {
            b.iter(|| rank(black_box(items.clone())).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("rollup", n), &list, |b, list| {
            b.iter(|| rollup_peptide_level(black_box(list)))
        });
        group.bench_with_input(BenchmarkId::new("profile", n), &list, |b, list| {
            b.iter(|| count_profile(black_box(list)))
        });
        group.bench_with_input(BenchmarkId::new("control", n), &list, |b, list| {
            b.iter(|| control(black_box(list), &policy))
        });
    }
    group.finish();
}

fn bench_oracle(c: &mut Criterion) {
    let policy = ControlPolicy::tdc(0.05, EstimatorConfig::plus_one()).unwrap();
    let space = AssignmentSpace::new(
        1.0,
        (0..6).map(|k| 100.0 - 2.0 * k as f64).collect(),
        (0..12).map(|k| 99.0 - 3.0 * k as f64).collect(),
    )
    .unwrap();
    c.bench_function("oracle/true_fdr_n12", |b| {
        b.iter(|| exact_true_fdr(black_box(&space), &Rule::Criterion(policy)))
    });
}

fn bench_montecarlo(c: &mut Criterion) {
    let s = scenario(500, 1_000);
    c.bench_function("montecarlo/run_1000_trials", |b| b.iter(|| run(black_box(&s)).unwrap()));
}

criterion_group!(benches, bench_pipeline, bench_oracle, bench_montecarlo);
criterion_main!(benches);
