use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dagsched_bench::{bench_cluster, fixed_size_dag};
use dagsched_core::bounds::new_lb;
use dagsched_core::construct::{build_schedule, ConstructConfig};
use std::hint::black_box;

fn construct(c: &mut Criterion) {
    let cluster = bench_cluster();
    let config = ConstructConfig::default();
    let mut group = c.benchmark_group("build_schedule");
    group.sample_size(10);
    for stages in [10, 30, 100] {
        let dag = fixed_size_dag(stages, 6, 7);
        group.bench_with_input(BenchmarkId::from_parameter(stages), &dag, |b, dag| {
            b.iter(|| build_schedule(black_box(dag), &cluster, &config).unwrap())
        });
    }
    group.finish();
}

fn bounds(c: &mut Criterion) {
    let cluster = bench_cluster();
    let dag = fixed_size_dag(100, 6, 7);
    c.bench_function("new_lb/100", |b| {
        b.iter(|| new_lb(black_box(&dag), &cluster))
    });
}

criterion_group!(benches, construct, bounds);
criterion_main!(benches);
