//! Criterion benchmarks for clustering, CCC, shock propagation and KS testing; see `benches/`.
