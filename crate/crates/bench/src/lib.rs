//! Criterion benchmarks for `loclin-core`; see `benches/`.
