use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use crsn::config::bundled;
use crsn::oracle::run_oracle_suite;
use crsn::sim::par::Execution;
use crsn::sim::sweep::run_sweep;

fn executions() -> [(&'static str, Execution); 2] {
    [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ]
}

fn oracle_batch(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle_200");
    for (name, ex) in executions() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &ex, |b, &ex| {
            b.iter(|| run_oracle_suite(200, 7, ex))
        });
    }
    g.finish();
}

fn fig7_sweep(c: &mut Criterion) {
    let mut config = bundled("fig7").unwrap();
    config.seeds = 4;
    config.periods = 2;
    let mut g = c.benchmark_group("fig7_sweep");
    g.sample_size(10);
    for (name, ex) in executions() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &ex, |b, &ex| {
            b.iter(|| run_sweep(&config, ex).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, oracle_batch, fig7_sweep);
criterion_main!(benches);
