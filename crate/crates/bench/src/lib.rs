//! Criterion benchmarks for `streamfuse`; the code lives in `benches/`.
