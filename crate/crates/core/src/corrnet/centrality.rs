use super::{StockGraph, POWER_ITERATION_MAX, POWER_ITERATION_TOL};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_DAMPING: f64 = 0.85;

fn require_nodes<T: Real>(g: &StockGraph<T>) -> Result<()> {
    if g.is_empty() {
        return Err(Error::InvalidArgument("graph has no nodes".into()));
    }
    Ok(())
}

/// Principal eigenvector of the `|weight|` adjacency matrix, non-negative with
/// unit Euclidean norm, aligned with `g.nodes()`.
///
/// Iterates on `A + I`, which has the same eigenvectors as `A` but a strictly
/// dominant top eigenvalue even on bipartite graphs.
pub fn eigenvector_centrality<T: Real>(g: &StockGraph<T>) -> Result<Vec<T>> {
    require_nodes(g)?;
    let adj = g.abs_adjacency();
    let n = adj.len();
    let tol = T::lit(POWER_ITERATION_TOL);
    let mut x = vec![T::one() / T::from_usize_lossy(n).sqrt(); n];
    let mut next = vec![T::zero(); n];
    let mut residual = T::infinity();
    for _ in 0..POWER_ITERATION_MAX {
        for (i, nbrs) in adj.iter().enumerate() {
            next[i] = x[i] + nbrs.iter().map(|&(j, w)| w * x[j]).sum::<T>();
        }
        let norm = next.iter().map(|&v| v * v).sum::<T>().sqrt();
        for v in &mut next {
            *v = *v / norm;
        }
        residual = x
            .iter()
            .zip(&next)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()));
        std::mem::swap(&mut x, &mut next);
        if residual < tol {
            return Ok(x);
        }
    }
    Err(Error::IterationLimit {
        iterations: POWER_ITERATION_MAX,
        residual: residual.as_f64(),
    })
}

/// PageRank on the `|weight|`-weighted symmetric transition structure.
/// Mass on nodes without edges is redistributed uniformly.
pub fn pagerank<T: Real>(g: &StockGraph<T>, damping: T) -> Result<Vec<T>> {
    require_nodes(g)?;
    if !(damping >= T::zero() && damping < T::one()) {
        return Err(Error::InvalidArgument(format!(
            "damping must lie in [0, 1), got {damping}"
        )));
    }
    let adj = g.abs_adjacency();
    let n = adj.len();
    let nn = T::from_usize_lossy(n);
    let strength: Vec<T> = adj.iter().map(|r| r.iter().map(|&(_, w)| w).sum()).collect();
    let tol = T::lit(POWER_ITERATION_TOL);
    let mut x = vec![T::one() / nn; n];
    let mut next = vec![T::zero(); n];
    let mut residual = T::infinity();
    for _ in 0..POWER_ITERATION_MAX {
        let dangling: T = (0..n)
            .filter(|&i| strength[i] == T::zero())
            .map(|i| x[i])
            .sum();
        let base = (T::one() - damping) / nn + damping * dangling / nn;
        for (i, nbrs) in adj.iter().enumerate() {
            let inflow: T = nbrs.iter().map(|&(j, w)| w * x[j] / strength[j]).sum();
            next[i] = base + damping * inflow;
        }
        let total: T = next.iter().copied().sum();
        for v in &mut next {
            *v = *v / total;
        }
        residual = x.iter().zip(&next).map(|(&a, &b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if residual < tol {
            return Ok(x);
        }
    }
    Err(Error::IterationLimit {
        iterations: POWER_ITERATION_MAX,
        residual: residual.as_f64(),
    })
}
