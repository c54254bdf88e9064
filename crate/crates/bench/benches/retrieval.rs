use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use loclin::lexicon::{dataset_from_words, Provenance};
use loclin::*;
use std::hint::black_box;

fn world(n: usize, dim: usize) -> SyntheticWorld {
    generate_world(&WorldConfig {
        n,
        dim,
        ..WorldConfig::default()
    })
    .unwrap()
}

fn bench_top_k(c: &mut Criterion) {
    let mut group = c.benchmark_group("top_k_by_cosine");
    for n in [10_000, 50_000] {
        let w = world(n, 300);
        let query = w.src.row(7).to_vec();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| top_k_by_cosine(&w.src, black_box(&query), 10, None).unwrap())
        });
    }
    group.finish();
}

fn bench_neighborhood(c: &mut Criterion) {
    let w = world(50_000, 300);
    c.bench_function("build_neighborhood/50000", |b| {
        b.iter(|| build_neighborhood(&w.src, black_box("s00007"), 0.5).unwrap())
    });
}

fn bench_precision(c: &mut Criterion) {
    let w = world(20_000, 300);
    let words = w.src.words()[..500].iter().map(String::as_str);
    let (test, _) = dataset_from_words(words, &w.lexicon, &w.src, &w.tgt, Provenance::Global);
    let map = w.global_map();
    c.bench_function("precision_at_10/500x20000", |b| {
        b.iter(|| precision_at_k(&map, black_box(&test), &w.tgt, 10).unwrap())
    });
}

criterion_group!(retrieval, bench_top_k, bench_neighborhood, bench_precision);
criterion_main!(retrieval);
