//! Criterion benchmarks for `lockstack-core`; the code lives under `benches/`.
