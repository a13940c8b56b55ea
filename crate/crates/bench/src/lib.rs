//! Criterion benchmarks for the spinmesh kernels live in `benches/`.
