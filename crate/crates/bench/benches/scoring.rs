use std::collections::BTreeSet;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use manu_bench::{importance_maps, scores, topology, trace};
use manu_core::{compute_importance_map, score_neurons, select_top, DatasetTag, ImportanceConfig, Modality, Scope};

fn importance(c: &mut Criterion) {
    let mut group = c.benchmark_group("compute_importance_map");
    let config = ImportanceConfig::default();
    for (width, samples) in [(128u32, 64usize), (512, 64), (512, 256)] {
        let topo = topology(2, width);
        let multi = trace(&topo, DatasetTag::Forget, Modality::Multimodal, samples, 0.0);
        let text = trace(&topo, DatasetTag::Forget, Modality::TextOnly, samples, 0.5);
        group.throughput(Throughput::Elements((topo.neuron_count() * samples) as u64));
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{}n_{samples}s", topo.neuron_count())),
            &(multi, text),
            |b, (m, t)| b.iter(|| compute_importance_map(m, t, &config).unwrap()),
        );
    }
    group.finish();
}

fn scoring(c: &mut Criterion) {
    let topo = topology(4, 2048);
    let (forget, retain) = importance_maps(&topo);
    c.bench_function("score_neurons/16384n", |b| b.iter(|| score_neurons(&forget, &retain, 1e-8).unwrap()));
}

fn selection(c: &mut Criterion) {
    let mut group = c.benchmark_group("select_top");
    let none = BTreeSet::new();
    for width in [1250u32, 12_500] {
        let topo = topology(4, width);
        let s = scores(&topo);
        for scope in [Scope::Global, Scope::PerTower] {
            group.bench_with_input(
                BenchmarkId::new(format!("{scope:?}"), topo.neuron_count()),
                &s,
                |b, s| b.iter(|| select_top(s, 5.0, scope, &none).unwrap()),
            );
        }
    }
    group.finish();
}

criterion_group!(benches, importance, scoring, selection);
criterion_main!(benches);
