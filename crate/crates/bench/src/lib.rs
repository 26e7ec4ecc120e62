//! Benchmark-only crate; see `benches/queueing.rs`.
