//! Benchmarks for the synthesis pipeline live in `benches/`.
