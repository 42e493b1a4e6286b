//! Benchmark-only crate; see `benches/streaming.rs`.
