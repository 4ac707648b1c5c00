//! Criterion benchmarks for `limbkin-core`; see `benches/`.
