//! Hierarchy and structure measures for trade networks.

use rayon::prelude::*;
use thiserror::Error;

use crate::hclust::{self, ClusterError, CondensedDistances, Dendrogram};
use crate::ingest::{CountryCode, GdpTable, TradeNetwork};
use crate::stats::{self, StatsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("distance sets differ in size: {0} vs {1} items")]
    SizeMismatch(usize, usize),
    #[error("need at least 3 items for a cophenetic correlation, got {0}")]
    TooFewItems(usize),
    #[error("zero variance in distances or cophenetic distances")]
    DegenerateVariance,
    #[error("missing GDP for {year}: {}", .countries.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(", "))]
    MissingGdp {
        year: i32,
        countries: Vec<CountryCode>,
    },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// Cophenetic correlation for one year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CccPoint {
    pub year: i32,
    pub ccc: f64,
    pub n_countries: usize,
}

/// Pearson correlation between original and cophenetic distances over all
/// item pairs. Pairs are summed in sorted order, so relabeling the items
/// leaves the result bit-identical.
pub fn ccc(d: &CondensedDistances, c: &CondensedDistances) -> Result<f64, MetricsError> {
    if d.n() != c.n() {
        return Err(MetricsError::SizeMismatch(d.n(), c.n()));
    }
    if d.n() < 3 {
        return Err(MetricsError::TooFewItems(d.n()));
    }
    let mut pairs: Vec<(f64, f64)> = d
        .values()
        .iter()
        .copied()
        .zip(c.values().iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    stats::pearson(&x, &y).map_err(|e| match e {
        StatsError::DegenerateVariance => MetricsError::DegenerateVariance,
        other => unreachable!("lengths already checked: {other}"),
    })
}

/// CCC of a network against its own average-linkage tree, together with
/// the tree.
pub fn ccc_with_tree(net: &TradeNetwork) -> Result<(f64, Dendrogram), MetricsError> {
    if net.len() < 3 {
        return Err(MetricsError::TooFewItems(net.len()));
    }
    let d = hclust::distances_from_network(net)?;
    let dend = hclust::average_linkage(&d)?;
    let value = ccc(&d, &hclust::cophenetic(&dend))?;
    Ok((value, dend))
}

pub fn ccc_of_network(net: &TradeNetwork) -> Result<CccPoint, MetricsError> {
    let (value, _) = ccc_with_tree(net)?;
    Ok(CccPoint {
        year: net.year(),
        ccc: value,
        n_countries: net.len(),
    })
}

/// One point per network that admits a CCC; failing years are logged and
/// skipped. Years are evaluated in parallel but returned in input order.
pub fn ccc_series(networks: &[TradeNetwork]) -> Vec<CccPoint> {
    networks
        .par_iter()
        .map(|net| {
            ccc_of_network(net)
                .map_err(|e| log::warn!("skipping year {}: {e}", net.year()))
                .ok()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Trade share matrix; rows and columns follow `countries`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareMatrix {
    pub countries: Vec<CountryCode>,
    values: Vec<f64>,
}

impl ShareMatrix {
    pub fn len(&self) -> usize {
        self.countries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.countries.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.values[i * n..(i + 1) * n]
    }
}

/// `S_ij = M_ij / (Σ_m M_im + Σ_n M_jn)`, zero on the diagonal and where
/// both countries are isolated.
pub fn share_matrix(net: &TradeNetwork) -> ShareMatrix {
    let n = net.len();
    let strength: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| net.weight(i, j)).sum())
        .collect();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let denom = strength[i] + strength[j];
            if i != j && denom > 0.0 {
                values[i * n + j] = net.weight(i, j) / denom;
            }
        }
    }
    ShareMatrix {
        countries: net.countries().to_vec(),
        values,
    }
}

/// Share matrix with rows and columns permuted into the dendrogram's leaf order.
pub fn ordered_share_matrix(
    net: &TradeNetwork,
    dend: &Dendrogram,
) -> Result<ShareMatrix, MetricsError> {
    if dend.n_leaves() != net.len() {
        return Err(MetricsError::SizeMismatch(net.len(), dend.n_leaves()));
    }
    Ok(permute(&share_matrix(net), &hclust::leaf_order(dend)))
}

pub(crate) fn permute(s: &ShareMatrix, order: &[usize]) -> ShareMatrix {
    let n = order.len();
    let mut values = Vec::with_capacity(n * n);
    for &i in order {
        values.extend(order.iter().map(|&j| s.get(i, j)));
    }
    ShareMatrix {
        countries: order.iter().map(|&i| s.countries[i].clone()).collect(),
        values,
    }
}

/// `Σ_{i<j} M_ij`.
pub fn total_trade(net: &TradeNetwork) -> f64 {
    let n = net.len();
    (0..n)
        .map(|i| ((i + 1)..n).map(|j| net.weight(i, j)).sum::<f64>())
        .sum()
}

/// Total trade divided by the summed GDP of the network's countries.
pub fn trade_gdp_ratio(net: &TradeNetwork, gdp: &GdpTable) -> Result<f64, MetricsError> {
    let mut world = 0.0;
    let mut missing = Vec::new();
    for c in net.countries() {
        match gdp.get(net.year(), c) {
            Some(y) => world += y,
            None => missing.push(c.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(MetricsError::MissingGdp {
            year: net.year(),
            countries: missing,
        });
    }
    Ok(total_trade(net) / world)
}
