//! Criterion benchmarks for the DCCRN core; see `benches/`.
