//! Criterion benchmarks for the hand synthesis pipeline; see `benches/`.
