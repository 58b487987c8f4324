//! Benchmarks live in benches/kernels.rs.
