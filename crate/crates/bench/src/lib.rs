//! Criterion benchmarks for the reconstruction hot paths; see `benches/`.
