//! Criterion benchmarks of the surrogate pipeline live in `benches/`.
