use atk_core::analysis::{
    build_transition_matrix, build_transition_matrix_sequential, trace_stats, trace_stats_sequential, StdKind,
};
use atk_core::retrieval::{search, search_many, Document, Index, RetrieverConfig};
use atk_core::trace::{Frame, Trace, TraceBuilder, TraceStatus};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

const WORDS: [&str; 16] = [
    "river", "capital", "france", "election", "winner", "planet", "mars", "population", "census", "nile",
    "length", "africa", "giant", "rings", "gas", "city",
];

fn phrase(seed: usize, len: usize) -> String {
    (0..len)
        .map(|i| WORDS[(seed * 7 + i * 5 + seed / 3) % WORDS.len()])
        .collect::<Vec<_>>()
        .join(" ")
}

fn traces(n: usize) -> Vec<Trace> {
    (0..n)
        .map(|t| {
            let mut b = TraceBuilder::new(format!("q{t}"), phrase(t, 3));
            for i in 0..t % 9 {
                let docids = (0..3).map(|d| (t * 31 + i * 7 + d) as u64);
                b.append_frame(Frame::new(i as u32, phrase(t + i, 1 + (t + i) % 5), docids, vec![]))
                    .unwrap();
            }
            b.finalize(Some("a".into()), TraceStatus::Answered).unwrap()
        })
        .collect()
}

fn corpus(n: usize) -> Vec<Document> {
    (0..n)
        .map(|d| Document::new(d as u64, Some(&phrase(d, 2)), phrase(d * 13 + 1, 40)))
        .collect()
}

fn bench_analysis(c: &mut Criterion) {
    let mut group = c.benchmark_group("transition_matrix");
    for n in [1_000, 20_000] {
        let ts = traces(n);
        group.bench_with_input(BenchmarkId::new("parallel", n), &ts, |b, ts| {
            b.iter(|| build_transition_matrix(black_box(ts)))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &ts, |b, ts| {
            b.iter(|| build_transition_matrix_sequential(black_box(ts)))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("trace_stats");
    let ts = traces(20_000);
    group.bench_function("parallel", |b| b.iter(|| trace_stats(black_box(&ts), StdKind::Population)));
    group.bench_function("sequential", |b| {
        b.iter(|| trace_stats_sequential(black_box(&ts), StdKind::Population))
    });
    group.finish();
}

fn bench_search(c: &mut Criterion) {
    let index = Index::build(&corpus(5_000)).unwrap();
    let queries: Vec<String> = (0..256).map(|q| phrase(q, 1 + q % 4)).collect();
    let config = RetrieverConfig::default();
    let mut group = c.benchmark_group("search_many");
    group.sample_size(20);
    group.bench_function("parallel", |b| b.iter(|| search_many(&index, black_box(&queries), &config)));
    group.bench_function("sequential", |b| {
        b.iter(|| {
            queries
                .iter()
                .map(|q| search(&index, black_box(q), &config))
                .collect::<Vec<_>>()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_analysis, bench_search);
criterion_main!(benches);
