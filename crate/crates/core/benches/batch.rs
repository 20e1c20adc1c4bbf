use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use katriage::datagen::{generate, GenConfig};
use katriage::parallel::Execution;
use katriage::{Engine, EngineConfig, RuleSet, Store};

fn ingest(c: &mut Criterion) {
    let data = generate(&GenConfig {
        seed: 11,
        n_persons: 40,
        days: 90,
        fraud_rate: 0.02,
        ..GenConfig::default()
    })
    .unwrap();
    let events = data.plain_transactions();

    let mut group = c.benchmark_group("ingest_batch");
    group.sample_size(10);
    for (name, execution) in [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &execution, |b, &execution| {
            b.iter(|| {
                let store = Arc::new(Store::in_memory());
                store.put_persons(data.persons.clone()).unwrap();
                let engine = Engine::new(
                    store,
                    RuleSet::default_rules(),
                    EngineConfig {
                        execution,
                        ..EngineConfig::default()
                    },
                );
                engine.ingest_events(events.clone()).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, ingest);
criterion_main!(benches);
