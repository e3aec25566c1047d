//! Return-correlation matrices, threshold networks and their node statistics.

mod centrality;
mod clustering;
pub mod export;
mod louvain;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::market_data::ReturnPanel;
use crate::scalar::Real;

pub use centrality::{eigenvector_centrality, pagerank, DEFAULT_DAMPING};
pub use clustering::{local_clustering, ClusteringMode};
pub use louvain::{louvain_communities, modularity, modularity_of_labels};

pub const POWER_ITERATION_TOL: f64 = 1e-10;
pub const POWER_ITERATION_MAX: usize = 10_000;

fn symmetry_tol<T: Real>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(100.0))
}

/// Symmetric, unit-diagonal matrix of return correlations.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrMatrix<T> {
    tickers: Vec<String>,
    values: Matrix<T>,
}

impl<T: Real> CorrMatrix<T> {
    /// Checks shape, symmetry and the unit diagonal.
    pub fn new(tickers: Vec<String>, values: Matrix<T>) -> Result<Self> {
        if !values.is_square() || values.nrows() != tickers.len() {
            return Err(Error::Dimension(format!(
                "{} tickers for a {}x{} correlation matrix",
                tickers.len(),
                values.nrows(),
                values.ncols()
            )));
        }
        let tol = symmetry_tol::<T>();
        let asym = values.max_asymmetry();
        if asym > tol {
            return Err(Error::NonSymmetric {
                asymmetry: asym.as_f64(),
            });
        }
        if let Some(i) = (0..tickers.len()).find(|&i| (values[(i, i)] - T::one()).abs() > tol) {
            return Err(Error::InvalidArgument(format!(
                "correlation diagonal for {} is {}, expected 1",
                tickers[i],
                values[(i, i)]
            )));
        }
        Ok(Self { tickers, values })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.tickers.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[(i, j)]
    }

    pub fn index_of(&self, ticker: &str) -> Option<usize> {
        self.tickers.iter().position(|t| t == ticker)
    }

    /// Off-diagonal upper-triangle entries.
    pub fn off_diagonal(&self) -> Vec<T> {
        self.values.upper_off_diagonal()
    }
}

/// Pearson correlation of the return columns.
pub fn correlation_matrix<T: Real>(returns: &ReturnPanel<T>) -> Result<CorrMatrix<T>> {
    let values = pearson(&returns.returns, &returns.tickers)?;
    CorrMatrix::new(returns.tickers.clone(), values)
}

/// Pearson correlation of the columns of `obs` (rows are observations).
pub(crate) fn pearson<T: Real>(obs: &Matrix<T>, names: &[String]) -> Result<Matrix<T>> {
    let (t, n) = (obs.nrows(), obs.ncols());
    if t < 2 {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least 2 observations, got {t}"
        )));
    }
    let tt = T::from_usize_lossy(t);
    // Standardised columns, stored contiguously per ticker.
    let mut z: Vec<Vec<T>> = Vec::with_capacity(n);
    for j in 0..n {
        let col = obs.column(j);
        let m = col.iter().copied().sum::<T>() / tt;
        let dev: Vec<T> = col.iter().map(|&x| x - m).collect();
        let ss: T = dev.iter().map(|&d| d * d).sum();
        let sd = (ss / tt).sqrt();
        let scale = m.abs().max(T::min_positive_value());
        if !(sd > T::epsilon() * T::lit(16.0) * scale) || !sd.is_finite() {
            return Err(Error::ZeroVariance {
                ticker: names.get(j).cloned().unwrap_or_else(|| format!("#{j}")),
            });
        }
        let norm = (ss).sqrt();
        z.push(dev.iter().map(|&d| d / norm).collect());
    }
    let rows: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![T::zero(); n];
            for j in i..n {
                row[j] = if i == j {
                    T::one()
                } else {
                    let c: T = z[i].iter().zip(&z[j]).map(|(&a, &b)| a * b).sum();
                    c.max(-T::one()).min(T::one())
                };
            }
            row
        })
        .collect();
    let mut m = Matrix::from_rows(&rows)?;
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge<T> {
    pub source: usize,
    pub target: usize,
    pub weight: T,
}

/// Undirected weighted graph over tickers.
#[derive(Clone, Debug, PartialEq)]
pub struct StockGraph<T> {
    nodes: Vec<String>,
    edges: Vec<Edge<T>>,
    rho_c: T,
}

impl<T: Real> StockGraph<T> {
    /// Validates endpoints, self-loops, duplicates and the threshold.
    pub fn new(nodes: Vec<String>, edges: Vec<Edge<T>>, rho_c: T) -> Result<Self> {
        let n = nodes.len();
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for e in &edges {
            if e.source >= n || e.target >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({}, {}) references a node outside 0..{n}",
                    e.source, e.target
                )));
            }
            if e.source == e.target {
                return Err(Error::InvalidArgument(format!(
                    "self-loop on {}",
                    nodes[e.source]
                )));
            }
            let key = (e.source.min(e.target), e.source.max(e.target));
            if !seen.insert(key) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate edge {}-{}",
                    nodes[key.0], nodes[key.1]
                )));
            }
            if e.weight.abs() < rho_c {
                return Err(Error::InvalidArgument(format!(
                    "edge {}-{} weight {} is below the threshold {rho_c}",
                    nodes[e.source], nodes[e.target], e.weight
                )));
            }
        }
        Ok(Self { nodes, edges, rho_c })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    pub fn rho_c(&self) -> T {
        self.rho_c
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, ticker: &str) -> Option<usize> {
        self.nodes.iter().position(|t| t == ticker)
    }

    /// Neighbour lists with absolute weights.
    pub fn abs_adjacency(&self) -> Vec<Vec<(usize, T)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.source].push((e.target, e.weight.abs()));
            adj[e.target].push((e.source, e.weight.abs()));
        }
        adj
    }

    pub fn abs_adjacency_maps(&self) -> Vec<HashMap<usize, T>> {
        self.abs_adjacency()
            .into_iter()
            .map(|row| row.into_iter().collect())
            .collect()
    }

    /// Pairs per-node values with their tickers.
    pub fn to_map<V: Clone>(&self, values: &[V]) -> BTreeMap<String, V> {
        self.nodes.iter().cloned().zip(values.iter().cloned()).collect()
    }
}

/// Keeps the off-diagonal pairs with `|C_ij| >= rho_c`; tickers without any
/// retained edge are dropped from the node list.
pub fn threshold_graph<T: Real>(corr: &CorrMatrix<T>, rho_c: T) -> Result<StockGraph<T>> {
    if !(rho_c >= T::zero() && rho_c <= T::one()) {
        return Err(Error::InvalidArgument(format!(
            "rho_c must lie in [0, 1], got {rho_c}"
        )));
    }
    let n = corr.n();
    let mut raw = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = corr.get(i, j);
            if w.abs() >= rho_c {
                raw.push((i, j, w));
            }
        }
    }
    let mut new_index = vec![usize::MAX; n];
    for &(i, j, _) in &raw {
        new_index[i] = 0;
        new_index[j] = 0;
    }
    let mut nodes = Vec::new();
    for (i, slot) in new_index.iter_mut().enumerate() {
        if *slot == 0 {
            *slot = nodes.len();
            nodes.push(corr.tickers()[i].clone());
        }
    }
    let edges = raw
        .into_iter()
        .map(|(i, j, weight)| Edge {
            source: new_index[i],
            target: new_index[j],
            weight,
        })
        .collect();
    Ok(StockGraph { nodes, edges, rho_c })
}

/// Number of incident edges per node, aligned with `g.nodes()`.
pub fn degree_sequence<T: Real>(g: &StockGraph<T>) -> Vec<usize> {
    let mut deg = vec![0; g.node_count()];
    for e in g.edges() {
        deg[e.source] += 1;
        deg[e.target] += 1;
    }
    deg
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeStats<T> {
    pub degree: usize,
    pub eigencentrality: T,
    pub pagerank: T,
    pub clustering: T,
    pub community: usize,
}

/// All per-node statistics, keyed by ticker. Clustering is the
/// geometric-weighted variant. An empty graph gives an empty map.
pub fn node_stats<T: Real>(g: &StockGraph<T>, louvain_seed: u64) -> Result<BTreeMap<String, NodeStats<T>>> {
    if g.is_empty() {
        return Ok(BTreeMap::new());
    }
    let degree = degree_sequence(g);
    let eig = eigenvector_centrality(g)?;
    let pr = pagerank(g, T::lit(DEFAULT_DAMPING))?;
    let clus = local_clustering(g, ClusteringMode::GeometricWeighted);
    let comm = louvain_communities(g, louvain_seed);
    Ok(g
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            (
                t.clone(),
                NodeStats {
                    degree: degree[i],
                    eigencentrality: eig[i],
                    pagerank: pr[i],
                    clustering: clus[i],
                    community: comm[i],
                },
            )
        })
        .collect())
}
