use serde::{Deserialize, Serialize};

use super::StockGraph;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusteringMode {
    /// Fraction of neighbour pairs that are linked.
    Binary,
    /// Intensity variant: geometric mean of the normalised triangle weights.
    GeometricWeighted,
}

/// Local clustering coefficient per node, aligned with `g.nodes()`.
///
/// Both modes sum over ordered neighbour pairs `(j, k)` and divide by
/// `k_i (k_i - 1)`; in weighted mode each triangle contributes
/// `(ŵ_ij ŵ_jk ŵ_ki)^(1/3)` with `ŵ = |w| / max |w|`. Degree below 2 gives 0.
pub fn local_clustering<T: Real>(g: &StockGraph<T>, mode: ClusteringMode) -> Vec<T> {
    let adj = g.abs_adjacency_maps();
    let max_w = g
        .edges()
        .iter()
        .fold(T::zero(), |acc, e| acc.max(e.weight.abs()));
    let third = T::one() / T::lit(3.0);
    adj.iter()
        .map(|nbrs| {
            let k = nbrs.len();
            if k < 2 {
                return T::zero();
            }
            let list: Vec<(usize, T)> = {
                let mut v: Vec<_> = nbrs.iter().map(|(&j, &w)| (j, w)).collect();
                v.sort_unstable_by_key(|&(j, _)| j);
                v
            };
            let mut total = T::zero();
            for (a, &(j, w_ij)) in list.iter().enumerate() {
                for &(kk, w_ik) in &list[a + 1..] {
                    if let Some(&w_jk) = adj[j].get(&kk) {
                        let contrib = match mode {
                            ClusteringMode::Binary => T::one(),
                            ClusteringMode::GeometricWeighted => {
                                ((w_ij / max_w) * (w_jk / max_w) * (w_ik / max_w)).powf(third)
                            }
                        };
                        // (j, k) and (k, j)
                        total = total + contrib + contrib;
                    }
                }
            }
            total / T::from_usize_lossy(k * (k - 1))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrnet::Edge;

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> StockGraph<f64> {
        StockGraph::new(
            (0..n).map(|i| format!("n{i}")).collect(),
            edges
                .iter()
                .map(|&(s, t, w)| Edge { source: s, target: t, weight: w })
                .collect(),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn full_weight_triangle_is_one() {
        let g = graph(3, &[(0, 1, 0.9), (1, 2, 0.9), (0, 2, -0.9)]);
        for mode in [ClusteringMode::Binary, ClusteringMode::GeometricWeighted] {
            let c = local_clustering(&g, mode);
            assert!(c.iter().all(|&v| (v - 1.0).abs() < 1e-15), "{mode:?}: {c:?}");
        }
    }

    #[test]
    fn star_has_no_triangles() {
        let g = graph(5, &[(0, 1, 0.9), (0, 2, 0.9), (0, 3, 0.9), (0, 4, 0.9)]);
        for mode in [ClusteringMode::Binary, ClusteringMode::GeometricWeighted] {
            assert!(local_clustering(&g, mode).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn weighted_triangle_uses_geometric_mean() {
        // max weight 1.0; triangle weights 1, 0.5, 0.25 -> (0.125)^(1/3) = 0.5
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 0.5), (0, 2, 0.25)]);
        let c = local_clustering(&g, ClusteringMode::GeometricWeighted);
        assert!(c.iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }
}
