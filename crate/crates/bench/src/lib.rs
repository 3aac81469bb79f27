//! Criterion benchmarks for the post-processing kernels live under `benches/`.
