use std::hint::black_box;

use canvas_core::credibility::{CredibilityConfig, CredibilityStore, EvidenceAssessment, NarrativeAnalysis};
use canvas_core::graph::Dimension;
use canvas_core::pathways::{suggest_from, Interaction, Pathway, PathwayStore};
use canvas_core::{AuthorId, EntryId, Execution};
use chrono::{Duration, TimeZone, Utc};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn step(i: usize) -> Interaction {
    match i % 4 {
        0 => Interaction::zoom("ai-safety", Dimension::Logical),
        1 => Interaction::zoom("ai-safety", Dimension::Temporal),
        2 => Interaction::zoom("ai-safety", Dimension::Geographical),
        _ => Interaction::ContentView { entry_id: EntryId::new("ai-safety"), block_id: None },
    }
}

fn pathways(n: usize) -> PathwayStore {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = PathwayStore::new();
    let t0 = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
    let author = AuthorId::new("bench");
    for k in 0..n {
        let at = t0 + Duration::seconds(k as i64);
        let s = store.start_session(&author, at).unwrap();
        let q = Interaction::Query { text: "ai safety".into(), target: None };
        store.record(&s, q, None, at).unwrap();
        for _ in 0..rng.random_range(5..40) {
            store.record(&s, step(rng.random_range(0..4)), None, at).unwrap();
        }
        store.archive(&s, at).unwrap();
    }
    store
}

fn bench_suggest(c: &mut Criterion) {
    let mut group = c.benchmark_group("suggest_next");
    let sig = step(0).signature();
    for n in [100, 2_000] {
        let store = pathways(n);
        let all: Vec<&Pathway> = store.archived().collect();
        for (name, mode) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &all, |b, all| {
                b.iter(|| black_box(suggest_from(all, &sig, mode)))
            });
        }
    }
    group.finish();
}

fn bench_validate(c: &mut Criterion) {
    let mut group = c.benchmark_group("validate_pathways");
    let store = pathways(2_000);
    for (name, mode) in MODES {
        group.bench_function(name, |b| b.iter(|| store.validate(mode).unwrap()));
    }
    group.finish();
}

fn bench_scores(c: &mut Criterion) {
    let mut group = c.benchmark_group("score_batch");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let store = CredibilityStore::new(CredibilityConfig::default()).unwrap();
    let items: Vec<_> = (0..50_000)
        .map(|_| {
            (
                EvidenceAssessment::from_array(std::array::from_fn(|_| rng.random())),
                NarrativeAnalysis::from_array(std::array::from_fn(|_| rng.random())),
            )
        })
        .collect();
    for (name, mode) in MODES {
        group.bench_function(name, |b| b.iter(|| black_box(store.score_batch(mode, &items))));
    }
    group.finish();
}

criterion_group!(benches, bench_suggest, bench_validate, bench_scores);
criterion_main!(benches);
