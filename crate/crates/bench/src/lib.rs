//! Criterion benchmarks for the ghostbeam kernels live in `benches/`.
