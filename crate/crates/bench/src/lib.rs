//! Criterion benchmarks for the FFMA decoders; see `benches/`.
