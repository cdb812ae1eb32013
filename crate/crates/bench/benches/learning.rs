use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use cip_core::learning::{learn_table, GridSpec, LearnSpec};
use cip_core::validation::{random_states, uniform_table};
use cip_core::{CipParams, EquilibriumIndex, SimSettings};

fn learn(c: &mut Criterion) {
    let p = CipParams::default();
    let mut spec = LearnSpec::reference(2);
    spec.grid = GridSpec::uniform(vec![[-0.05, 0.05], [-0.5, 0.5], [-0.05, 0.05], [-0.5, 0.5]], 2).unwrap();
    spec.settings = SimSettings { horizon: 10.0, ..SimSettings::default() };
    let mut g = c.benchmark_group("learn");
    g.sample_size(10);
    g.bench_function("16 cells, 10 s horizon", |b| b.iter(|| learn_table(&spec, &p, Some(1)).unwrap()));
    g.finish();
}

fn lookup(c: &mut Criterion) {
    let p = CipParams::default();
    let t = uniform_table(&p, 50, EquilibriumIndex::new(2).unwrap());
    let states = random_states(&p, t.grid(), 1024, 1);
    c.bench_function("classify 1024 states, m = 50", |b| {
        b.iter(|| states.iter().filter_map(|s| t.classify(black_box(s))).count())
    });
}

criterion_group!(benches, learn, lookup);
criterion_main!(benches);
