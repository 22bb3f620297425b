//! Criterion benchmarks for the conversion, enhancement and inference stages; see `benches/`.
