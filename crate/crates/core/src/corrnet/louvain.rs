//! Louvain modularity maximisation on `|weight|` edges, resolution 1.

use std::collections::BTreeMap;

use super::StockGraph;
use crate::error::{Error, Result};
use crate::rng::{derive_key, CounterRng};
use crate::scalar::Real;

const MIN_GAIN: f64 = 1e-12;
const LOUVAIN_NAMESPACE: u64 = 0x4C4F_5556; // "LOUV"

struct Level {
    /// Neighbour lists without self-loops.
    adj: Vec<Vec<(usize, f64)>>,
    /// Self-loop weight (internal weight of an aggregated community).
    self_loop: Vec<f64>,
    /// Total undirected edge weight, self-loops counted once.
    m: f64,
}

impl Level {
    fn strength(&self, i: usize) -> f64 {
        self.adj[i].iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * self.self_loop[i]
    }

    /// Local moving phase; returns the community of every node and whether
    /// anything moved.
    fn local_moves(&self, rng: &CounterRng, offset: u64) -> (Vec<usize>, bool) {
        let n = self.adj.len();
        let k: Vec<f64> = (0..n).map(|i| self.strength(i)).collect();
        let two_m = 2.0 * self.m;
        let mut comm: Vec<usize> = (0..n).collect();
        let mut tot = k.clone();
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order, offset);

        let mut moved_any = false;
        let mut link = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        loop {
            let mut moved = false;
            for &i in &order {
                let ci = comm[i];
                for &(j, w) in &self.adj[i] {
                    let cj = comm[j];
                    if link[cj] == 0.0 {
                        touched.push(cj);
                    }
                    link[cj] += w;
                }
                tot[ci] -= k[i];
                let gain = |c: usize, l: f64| l - tot[c] * k[i] / two_m;
                let mut best = ci;
                let mut best_gain = gain(ci, link[ci]);
                touched.sort_unstable();
                for &c in &touched {
                    let g = gain(c, link[c]);
                    if g > best_gain + MIN_GAIN {
                        best = c;
                        best_gain = g;
                    }
                }
                tot[best] += k[i];
                if best != ci {
                    comm[i] = best;
                    moved = true;
                    moved_any = true;
                }
                for &c in &touched {
                    link[c] = 0.0;
                }
                touched.clear();
            }
            if !moved {
                break;
            }
        }
        (comm, moved_any)
    }

    fn aggregate(&self, comm: &[usize]) -> (Level, Vec<usize>) {
        let relabel = renumber(comm);
        let k = relabel.iter().copied().max().map_or(0, |m| m + 1);
        let mut weights: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); k];
        let mut self_loop = vec![0.0; k];
        for (i, nbrs) in self.adj.iter().enumerate() {
            let ci = relabel[i];
            self_loop[ci] += self.self_loop[i];
            for &(j, w) in nbrs {
                let cj = relabel[j];
                if ci == cj {
                    // each undirected edge is seen from both ends
                    self_loop[ci] += w / 2.0;
                } else {
                    *weights[ci].entry(cj).or_insert(0.0) += w;
                }
            }
        }
        let adj = weights
            .into_iter()
            .map(|row| row.into_iter().collect())
            .collect();
        (
            Level {
                adj,
                self_loop,
                m: self.m,
            },
            relabel,
        )
    }
}

/// Relabels communities to 0..k-1 in order of first appearance.
fn renumber(labels: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}

/// Community label per node (aligned with `g.nodes()`), labels `0..k-1`.
/// Node visiting order is a seeded shuffle, so the result is a pure function
/// of the graph and `seed`.
pub fn louvain_communities<T: Real>(g: &StockGraph<T>, seed: u64) -> Vec<usize> {
    let n = g.node_count();
    let adj: Vec<Vec<(usize, f64)>> = g
        .abs_adjacency()
        .into_iter()
        .map(|row| row.into_iter().map(|(j, w)| (j, w.as_f64())).collect())
        .collect();
    let m = g.edges().iter().map(|e| e.weight.abs().as_f64()).sum::<f64>();
    let mut membership: Vec<usize> = (0..n).collect();
    if m <= 0.0 {
        return membership;
    }
    let rng = CounterRng::new(derive_key(&[LOUVAIN_NAMESPACE, seed]));
    let mut level = Level {
        adj,
        self_loop: vec![0.0; n],
        m,
    };
    let mut offset = 0u64;
    loop {
        let (comm, moved) = level.local_moves(&rng, offset);
        offset += level.adj.len() as u64;
        if !moved {
            break;
        }
        let (next, relabel) = level.aggregate(&comm);
        for c in &mut membership {
            *c = relabel[*c];
        }
        level = next;
    }
    renumber(&membership)
}

/// Weighted Newman modularity of a per-node label vector.
pub fn modularity_of_labels<T: Real>(g: &StockGraph<T>, labels: &[usize]) -> T {
    assert_eq!(labels.len(), g.node_count());
    let m: f64 = g.edges().iter().map(|e| e.weight.abs().as_f64()).sum();
    if m <= 0.0 {
        return T::zero();
    }
    let mut internal: BTreeMap<usize, f64> = BTreeMap::new();
    let mut total: BTreeMap<usize, f64> = BTreeMap::new();
    for e in g.edges() {
        let w = e.weight.abs().as_f64();
        let (a, b) = (labels[e.source], labels[e.target]);
        if a == b {
            *internal.entry(a).or_insert(0.0) += w;
        }
        *total.entry(a).or_insert(0.0) += w;
        *total.entry(b).or_insert(0.0) += w;
    }
    let q: f64 = total
        .iter()
        .map(|(c, &d)| internal.get(c).copied().unwrap_or(0.0) / m - (d / (2.0 * m)).powi(2))
        .sum();
    T::lit(q)
}

/// Modularity of a ticker → label partition; every node must be covered.
pub fn modularity<T: Real>(g: &StockGraph<T>, partition: &BTreeMap<String, usize>) -> Result<T> {
    let labels = g
        .nodes()
        .iter()
        .map(|t| partition.get(t).copied().ok_or_else(|| Error::MissingNode(t.clone())))
        .collect::<Result<Vec<_>>>()?;
    Ok(modularity_of_labels(g, &labels))
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

    fn two_triangles() -> StockGraph<f64> {
        graph(
            6,
            &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0)],
        )
    }

    #[test]
    fn disjoint_triangles_split() {
        let g = two_triangles();
        for seed in 0..10 {
            let c = louvain_communities(&g, seed);
            assert_eq!(c, vec![0, 0, 0, 1, 1, 1], "seed {seed}");
        }
        let q: f64 = modularity_of_labels(&g, &[0, 0, 0, 1, 1, 1]);
        assert!((q - 0.5).abs() < 1e-15);
    }

    #[test]
    fn one_community_has_zero_modularity() {
        let g = two_triangles();
        let q: f64 = modularity_of_labels(&g, &[0; 6]);
        assert!(q.abs() < 1e-15);
    }

    #[test]
    fn single_edge_not_worse_than_singletons() {
        let g = graph(2, &[(0, 1, 0.9)]);
        let c = louvain_communities(&g, 3);
        let q: f64 = modularity_of_labels(&g, &c);
        let singles: f64 = modularity_of_labels(&g, &[0, 1]);
        assert!(q >= singles);
    }

    #[test]
    fn missing_node_is_an_error() {
        let g = two_triangles();
        let mut p: BTreeMap<String, usize> = (0..5).map(|i| (format!("n{i}"), 0)).collect();
        assert!(matches!(modularity(&g, &p), Err(Error::MissingNode(t)) if t == "n5"));
        p.insert("n5".into(), 1);
        assert!(modularity::<f64>(&g, &p).is_ok());
    }

    #[test]
    fn edgeless_graph_is_singletons() {
        let g = graph(3, &[]);
        assert_eq!(louvain_communities(&g, 0), vec![0, 1, 2]);
    }

    #[test]
    fn deterministic_for_seed() {
        let mut e = Vec::new();
        for i in 0..12usize {
            for j in (i + 1)..12 {
                if (i * 7 + j * 3) % 5 < 2 {
                    e.push((i, j, 0.5 + 0.04 * ((i + j) % 10) as f64));
                }
            }
        }
        let g = graph(12, &e);
        assert_eq!(louvain_communities(&g, 11), louvain_communities(&g, 11));
    }
}
