use std::hint::black_box;

use boxsearch_core::{
    build_l, exact_time, make_pareto, make_uniform, run, SearcherKind, SearcherSpec, SimConfig,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn water_levels(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_l");
    for m in [100, 10_000, 1_000_000] {
        let prior = make_pareto(0.5, m).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &prior, |b, p| {
            b.iter(|| build_l(black_box(p), 2).unwrap())
        });
    }
    group.finish();
}

fn exact_times(c: &mut Criterion) {
    let prior = make_pareto(0.5, 10_000).unwrap();
    let mut group = c.benchmark_group("exact_time");
    group.sample_size(10);
    for kind in [SearcherKind::Astar, SearcherKind::Pareto, SearcherKind::Universal, SearcherKind::Memory] {
        let spec = SearcherSpec::new(kind, 2, &prior).unwrap();
        group.bench_function(kind.name(), |b| b.iter(|| exact_time(black_box(&spec), &prior).unwrap()));
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("sim_10k_trials");
    group.sample_size(10);
    for (label, prior) in [("uniform:50", make_uniform(50).unwrap()), ("pareto:0.5,1000", make_pareto(0.5, 1000).unwrap())] {
        for kind in [SearcherKind::Astar, SearcherKind::Universal, SearcherKind::UniformReplacement] {
            let config = SimConfig::new(prior.clone(), kind, 2, 10_000, 1).unwrap();
            group.bench_function(format!("{kind}/{label}"), |b| b.iter(|| run(black_box(&config)).unwrap()));
        }
    }
    group.finish();
}

criterion_group!(benches, water_levels, exact_times, simulation);
criterion_main!(benches);
