//! Criterion benchmarks for the flow right-hand side and the singular convolution; see `benches/`.
