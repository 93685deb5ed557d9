//! Criterion benchmarks for the forecasting kernels; see `benches/`.
