//! Criterion benchmarks for maxnit; see `benches/`.
