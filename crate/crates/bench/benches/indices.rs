use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mcnpower::datagen::{self, GenMethod, GenSpec};
use mcnpower::exact::{exact_alg4_estimand, exact_banzhaf_eq1, exact_shapley_eq2};
use mcnpower::mc::{mc_banzhaf, mc_shapley};
use mcnpower::mcn::coalition_value;
use mcnpower::{AgentSet, McConfig, RuleSet};

fn game(n: usize, m: usize) -> RuleSet {
    let spec = GenSpec {
        seed: 42,
        ..GenSpec::new(GenMethod::Uniform, 1, n, m)
    };
    datagen::generate(&spec).unwrap().remove(0)
}

fn value(c: &mut Criterion) {
    let rs = game(20, 10);
    let coalitions: Vec<AgentSet> = (0..1024u64).map(AgentSet::from_bits).collect();
    c.bench_function("coalition_value/n20_m10_x1024", |b| {
        b.iter(|| coalitions.iter().map(|&s| coalition_value(&rs, black_box(s))).sum::<f64>())
    });
}

fn sampled(c: &mut Criterion) {
    let rs = game(20, 10);
    let mut g = c.benchmark_group("sampled");
    g.sample_size(20);
    for n in [1_000u64, 10_000] {
        g.bench_with_input(BenchmarkId::new("banzhaf", n), &n, |b, &n| {
            b.iter(|| mc_banzhaf(&rs, &McConfig::new(n, 1)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("shapley", n), &n, |b, &n| {
            b.iter(|| mc_shapley(&rs, &McConfig::new(n, 1)).unwrap())
        });
    }
    g.finish();
}

fn exact(c: &mut Criterion) {
    let mut g = c.benchmark_group("exact");
    g.sample_size(20);
    for m in [6usize, 10, 12] {
        let rs = game(20, m);
        g.bench_with_input(BenchmarkId::new("banzhaf_eq1", m), &rs, |b, rs| {
            b.iter(|| exact_banzhaf_eq1(rs).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("alg4_estimand", m), &rs, |b, rs| {
            b.iter(|| exact_alg4_estimand(rs).unwrap())
        });
    }
    let rs = game(20, 8);
    g.bench_function("shapley_eq2/8", |b| b.iter(|| exact_shapley_eq2(&rs).unwrap()));
    g.finish();
}

criterion_group!(benches, value, sampled, exact);
criterion_main!(benches);
