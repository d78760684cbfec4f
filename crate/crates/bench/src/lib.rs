//! Benchmarks for the simulator kernels; see `benches/`.
