//! Criterion benchmarks for schatten-core live in `benches/`.
