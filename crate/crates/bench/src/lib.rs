//! Criterion benchmarks for the statistics and dataset builders; see `benches/`.
