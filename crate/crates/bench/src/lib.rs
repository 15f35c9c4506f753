//! Criterion benchmarks for the planning and sampling routines; see `benches/`.
