//! Criterion benchmarks for the simulator, environment, policy and spectral hot paths.
//! Run with `cargo bench -p quietgait-bench`.
