//! Hierarchical structure and shock response of weighted trade networks.
//!
//! The crate turns bilateral trade tables into per-year networks
//! ([`ingest`]), measures how tree-like each network is through
//! average-linkage dendrograms and the cophenetic correlation coefficient
//! ([`hclust`], [`metrics`]), propagates a GDP shock from one country through
//! the directed export network and fits the recovery ([`shockprop`]), and
//! tests whether the CCC shifts across recession windows ([`stats`]).
//!
//! ```
//! use trade_topology::{hclust, metrics};
//!
//! let d = hclust::CondensedDistances::new(3, vec![1.0, 4.0, 5.0]).unwrap();
//! let tree = hclust::average_linkage(&d).unwrap();
//! let c = hclust::cophenetic(&tree);
//! assert_eq!(c.values(), &[1.0, 4.5, 4.5]);
//! let ccc = metrics::ccc(&d, &c).unwrap();
//! assert!((ccc - 7.0 / 52f64.sqrt()).abs() < 1e-12);
//! ```

pub mod hclust;
pub mod ingest;
pub mod metrics;
pub mod shockprop;
pub mod stats;

pub use hclust::{ClusterError, CondensedDistances, Dendrogram, Merge};
pub use ingest::{
    CountryCode, DirectedFlows, GdpRecord, GdpTable, IngestError, RecessionWindow, Symmetrization,
    TradeFlowRecord, TradeNetwork, TradeTable, YearMonth,
};
pub use metrics::{CccPoint, MetricsError, ShareMatrix};
pub use shockprop::{
    EconomyState, RecoveryFit, ShockConfig, ShockError, SimulationTrace, UpdateRule,
};
pub use stats::{KsMethod, KsResult, RecessionShift, StatsError};
