//! Library results checked against independent reference computations.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use netcorr::calibrate::wasserstein_1d;
use netcorr::corrnet::{
    correlation_matrix, degree_sequence, eigenvector_centrality, local_clustering, louvain_communities,
    modularity_of_labels, pagerank, ClusteringMode,
};
use netcorr::gbm::{community_walks, market_configs, own_seed, simulate_gbm_corr, Channel, CorrChannelConfig};
use netcorr::linalg::{symmetric_eigen, Matrix};
use netcorr::market_data::{estimate_gbm_params, log_returns, GbmParams, PricePanel, ReturnPanel};
use netcorr::portfolio::{portfolio_stats, PortfolioWeights};
use netcorr::spectral::{mp_density, MpParams};

fn to_na(m: &Matrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

#[test]
fn symmetric_eigen_matches_nalgebra() {
    for seed in 0..5 {
        let n = 8 + 7 * seed as usize;
        let r = rng(&[seed, 10]);
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = r.normal((i * n + j) as u64);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let ours = symmetric_eigen(&a).unwrap();
        let reference = to_na(&a).symmetric_eigen();
        let mut expected: Vec<(f64, usize)> =
            reference.eigenvalues.iter().copied().enumerate().map(|(k, v)| (v, k)).collect();
        expected.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
        for (k, &(value, col)) in expected.iter().enumerate() {
            assert!((ours.values[k] - value).abs() < 1e-9, "eigenvalue {k}: {} vs {value}", ours.values[k]);
            let dot: f64 = (0..n).map(|i| ours.vectors[(i, k)] * reference.eigenvectors[(i, col)]).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-7, "eigenvector {k} overlap {dot}");
        }
    }
}

#[test]
fn eigenvector_centrality_matches_dense_eigenvector() {
    let g = random_graph(15, 0.4, 0.9, 1.0, 7);
    let a = dense_adjacency(&g);
    let n = a.len();
    let eig = DMatrix::from_fn(n, n, |i, j| a[i][j]).symmetric_eigen();
    let top = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(top);
    let sign = if v.sum() < 0.0 { -1.0 } else { 1.0 };
    let ours = eigenvector_centrality(&g).unwrap();
    for i in 0..n {
        assert!((ours[i] - sign * v[i]).abs() < 1e-8, "node {i}: {} vs {}", ours[i], sign * v[i]);
    }
}

#[test]
fn pagerank_matches_linear_solve() {
    let g = random_graph(15, 0.4, 0.9, 1.0, 8);
    let a = dense_adjacency(&g);
    let n = a.len();
    let d = 0.85;
    let strength: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    assert!(strength.iter().all(|&s| s > 0.0), "fixture must have no isolated nodes");
    // x = (1-d)/n + d M x with M_ij = a_ij / s_j.
    let system = DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) - d * a[i][j] / strength[j]);
    let rhs = DVector::from_element(n, (1.0 - d) / n as f64);
    let x = system.lu().solve(&rhs).unwrap();
    let ours = pagerank(&g, d).unwrap();
    for i in 0..n {
        assert!((ours[i] - x[i]).abs() < 1e-8);
    }
}

#[test]
fn clustering_matches_triangle_enumeration() {
    for seed in 0..4 {
        let g = random_graph(12, 0.5, 0.1, 1.0, 20 + seed);
        let a = dense_adjacency(&g);
        let n = a.len();
        let max_w = a.iter().flatten().fold(0.0f64, |m, &w| m.max(w));
        let binary = local_clustering(&g, ClusteringMode::Binary);
        let weighted = local_clustering(&g, ClusteringMode::GeometricWeighted);
        for i in 0..n {
            let nbrs: Vec<usize> = (0..n).filter(|&j| a[i][j] > 0.0).collect();
            let k = nbrs.len() as f64;
            let (mut tri, mut wtri) = (0.0, 0.0);
            for &j in &nbrs {
                for &h in &nbrs {
                    if j != h && a[j][h] > 0.0 {
                        tri += 1.0;
                        wtri += (a[i][j] * a[j][h] * a[h][i] / max_w.powi(3)).cbrt();
                    }
                }
            }
            let (cb, cw) = if k < 2.0 { (0.0, 0.0) } else { (tri / (k * (k - 1.0)), wtri / (k * (k - 1.0))) };
            assert!((binary[i] - cb).abs() < 1e-12);
            assert!((weighted[i] - cw).abs() < 1e-12);
        }
    }
}

#[test]
fn degrees_are_adjacency_row_counts() {
    let g = random_graph(20, 0.3, -1.0, 1.0, 3);
    let a = dense_adjacency(&g);
    let expected: Vec<usize> = a.iter().map(|r| r.iter().filter(|&&w| w > 0.0).count()).collect();
    assert_eq!(degree_sequence(&g), expected);
}

fn planted_partition(seed: u64) -> netcorr::StockGraph64 {
    let r = rng(&[seed, 30]);
    let mut edges = Vec::new();
    for i in 0..20 {
        for j in (i + 1)..20 {
            let p = if i / 10 == j / 10 { 0.9 } else { 0.05 };
            if r.uniform((i * 20 + j) as u64) < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    graph(20, &edges)
}

#[test]
fn louvain_recovers_planted_blocks() {
    let recovered = (0..20)
        .filter(|&seed| {
            let labels = louvain_communities(&planted_partition(seed), seed);
            let same = |i: usize, j: usize| labels[i] == labels[j];
            (0..20).all(|i| (0..20).all(|j| same(i, j) == (i / 10 == j / 10)))
        })
        .count();
    assert!(recovered >= 18, "recovered {recovered}/20 planted partitions");
}

#[test]
fn louvain_beats_random_partitions() {
    for seed in 0..10 {
        let g = random_graph(30, 0.2, 0.5, 1.0, 40 + seed);
        let q = modularity_of_labels(&g, &louvain_communities(&g, seed));
        let r = rng(&[seed, 41]);
        for trial in 0..20u64 {
            let labels: Vec<usize> = (0..30).map(|i| r.below(trial * 30 + i, 4) as usize).collect();
            assert!(q >= modularity_of_labels(&g, &labels));
        }
    }
}

/// ∫ f(λ) dλ over the MP support via λ = c + r cos θ, which removes the
/// square-root endpoint singularities; midpoint rule in θ.
fn mp_integral(p: &MpParams<f64>, f: impl Fn(f64) -> f64) -> f64 {
    let c = 0.5 * (p.lambda_plus + p.lambda_minus);
    let r = 0.5 * (p.lambda_plus - p.lambda_minus);
    let steps = 20_000;
    let h = std::f64::consts::PI / steps as f64;
    (0..steps)
        .map(|k| {
            let th = (k as f64 + 0.5) * h;
            let lam = c + r * th.cos();
            f(lam) * mp_density(lam, p) * r * th.sin() * h
        })
        .sum()
}

#[test]
fn mp_density_mass_and_mean() {
    for &q in &[1.0, 2.0, 2.594, 4.0] {
        for &s2 in &[1.0, 0.58] {
            let p = MpParams::new(q, s2).unwrap();
            let mass = mp_integral(&p, |_| 1.0);
            let mean = mp_integral(&p, |l| l);
            assert!((mass - 1.0).abs() < 1e-6, "q = {q}: mass {mass}");
            assert!((mean - s2).abs() < 1e-6, "q = {q}: mean {mean}");
        }
    }
}

#[test]
fn correlation_matches_pearson_definition() {
    let x = factor_returns(12, 80, 0.5, 0.02, 5);
    let returns = ReturnPanel {
        tickers: tickers(12),
        dates: weekdays(80),
        returns: x.clone(),
    };
    let c = correlation_matrix(&returns).unwrap();
    let col = |i: usize| -> Vec<f64> { (0..80).map(|k| x[(k, i)]).collect() };
    for i in 0..12 {
        for j in 0..12 {
            let (a, b) = (col(i), col(j));
            let ma = a.iter().sum::<f64>() / 80.0;
            let mb = b.iter().sum::<f64>() / 80.0;
            let sab: f64 = a.iter().zip(&b).map(|(u, v)| (u - ma) * (v - mb)).sum();
            let saa: f64 = a.iter().map(|u| (u - ma).powi(2)).sum();
            let sbb: f64 = b.iter().map(|v| (v - mb).powi(2)).sum();
            assert!((c.get(i, j) - sab / (saa * sbb).sqrt()).abs() < 1e-12);
        }
    }
}

#[test]
fn gbm_parameters_are_recovered() {
    let (mu, sigma, n) = (0.0004f64, 0.015f64, 20_000usize);
    let params = GbmParams::new(50.0, mu, sigma).unwrap();
    for seed in 0..5u64 {
        let path = simulate_gbm_corr(&params, n + 1, &CorrChannelConfig::independent(), seed, seed);
        let est = estimate_gbm_params(&path, 0..n + 1).unwrap();
        let nf = n as f64;
        // Drift of log-returns has standard error σ/√n, σ̂ has σ/√(2n).
        let drift_hat = est.mu - est.sigma * est.sigma / 2.0;
        assert!((drift_hat - (mu - sigma * sigma / 2.0)).abs() < 3.0 * sigma / nf.sqrt());
        assert!((est.sigma - sigma).abs() < 3.0 * sigma / (2.0 * nf).sqrt());
        assert_eq!(est.s0, path[n]);
    }
}

#[test]
fn verbatim_mix_variance_is_sum_of_squares() {
    // 1000 pairs, each pair on its own shared channel; σ = 1 and μ = 1/2 make
    // the log-returns equal to the mixed noise ε.
    let c: f64 = 0.5;
    let params: GbmParams<f64> = GbmParams::new(1.0, 0.5, 1.0).unwrap();
    let (pairs, steps) = (1000u64, 101usize);
    let (mut sum, mut sum_sq, mut cross, mut count) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for p in 0..pairs {
        let cfg = CorrChannelConfig::new(c, 10_000 + p).unwrap();
        let a = simulate_gbm_corr(&params, steps, &cfg, own_seed(9, Channel::Community, &format!("a{p}")), 9);
        let b = simulate_gbm_corr(&params, steps, &cfg, own_seed(9, Channel::Community, &format!("b{p}")), 9);
        for k in 1..steps {
            let ea = (a[k] / a[k - 1]).ln();
            let eb = (b[k] / b[k - 1]).ln();
            sum += ea + eb;
            sum_sq += ea * ea + eb * eb;
            cross += ea * eb;
            count += 1.0;
        }
    }
    let n = 2.0 * count;
    let var = sum_sq / n - (sum / n).powi(2);
    let expected = (1.0 - c) * (1.0 - c) + c * c;
    // Sample variance of Gaussian data: standard error √(2/n) · Var.
    let se = expected * (2.0 / n).sqrt();
    assert!((var - expected).abs() < 4.0 * se, "Var(ε) = {var}, expected {expected} ± {se}");
    let cov = cross / count;
    assert!((cov - c * c).abs() < 0.02, "pair covariance {cov}");
}

#[test]
fn market_assignment_matches_exhaustive_argmax() {
    let c = random_correlation(9, 77);
    let names = tickers(9);
    let market = vec![names[2].clone(), names[5].clone(), names[7].clone()];
    let configs = market_configs(&names, &c, &market).unwrap();
    for (i, cfg) in configs.iter().enumerate() {
        let expected = if [2, 5, 7].contains(&i) {
            1.0
        } else {
            let j = [2, 5, 7]
                .into_iter()
                .max_by(|&a, &b| c.get(i, a).abs().partial_cmp(&c.get(i, b).abs()).unwrap())
                .unwrap();
            c.get(i, j)
        };
        assert_eq!(cfg.c_eff, expected);
    }
}

#[test]
fn wasserstein_matches_transport_oracles() {
    let r = rng(&[50]);
    let mut idx = 0u64;
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| {
                idx += 1;
                r.normal(idx)
            })
            .collect()
    };
    // Equal sizes: optimal coupling is a permutation, so enumerate them all.
    for n in 1..=6 {
        let a = draw(n);
        let b = draw(n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permutations(&mut perm, 0, &mut |p| {
            let cost = (0..n).map(|i| (a[i] - b[p[i]]).abs()).sum::<f64>() / n as f64;
            best = best.min(cost);
        });
        assert!((wasserstein_1d(&a, &b).unwrap() - best).abs() < 1e-12);
    }
    // Unequal sizes: ∫ |F_a - F_b| dx evaluated exactly between breakpoints.
    for (n, m) in [(2, 3), (3, 5), (4, 7), (1, 4)] {
        let a = draw(n);
        let b = draw(m);
        let cdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
        let mut pts: Vec<f64> = a.iter().chain(&b).copied().collect();
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let integral: f64 = pts.windows(2).map(|w| (w[1] - w[0]) * (cdf(&a, w[0]) - cdf(&b, w[0])).abs()).sum();
        assert!((wasserstein_1d(&a, &b).unwrap() - integral).abs() < 1e-12);
    }
}

fn permutations(p: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, visit);
        p.swap(k, i);
    }
}

#[test]
fn portfolio_stats_match_matrix_arithmetic() {
    let r = rng(&[60]);
    let raw: Vec<f64> = (0..4).map(|i| r.uniform(i)).collect();
    let total: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let mu: Vec<f64> = (0..4).map(|i| 0.05 * r.normal(10 + i)).collect();
    let f = DMatrix::from_fn(4, 6, |i, j| r.normal(100 + (i * 6 + j) as u64));
    let cov_na = &f * f.transpose() / 6.0;
    let cov = Matrix::from_fn(4, 4, |i, j| cov_na[(i, j)]);
    let wv = DVector::from_vec(w.clone());
    let ret = wv.dot(&DVector::from_vec(mu.clone()));
    let sigma = (wv.transpose() * &cov_na * &wv)[(0, 0)].sqrt();
    let stats = portfolio_stats(&PortfolioWeights { tickers: tickers(4), weights: w }, &mu, &cov, 0.01).unwrap();
    assert!((stats.expected_return - ret).abs() < 1e-14);
    assert!((stats.sigma - sigma).abs() < 1e-12);
    assert!((stats.sharpe - (ret - 0.01) / sigma).abs() < 1e-10);
}

#[test]
fn single_precision_tracks_double() {
    let x = factor_returns(10, 200, 0.6, 0.01, 70);
    let x32 = Matrix::from_fn(200, 10, |k, i| x[(k, i)] as f32);
    let c64 = correlation_matrix(&ReturnPanel { tickers: tickers(10), dates: weekdays(200), returns: x }).unwrap();
    let c32 = correlation_matrix(&ReturnPanel { tickers: tickers(10), dates: weekdays(200), returns: x32 }).unwrap();
    let e64 = symmetric_eigen(c64.values()).unwrap();
    let e32 = symmetric_eigen(c32.values()).unwrap();
    for k in 0..10 {
        assert!((e64.values[k] - f64::from(e32.values[k])).abs() < 1e-4);
    }
    let a32: Vec<f32> = c32.off_diagonal();
    let a64: Vec<f64> = c64.off_diagonal();
    let w32 = wasserstein_1d(&a32, &[0.0f32]).unwrap();
    let w64 = wasserstein_1d(&a64, &[0.0]).unwrap();
    assert!((w64 - f64::from(w32)).abs() < 1e-5);
}

#[test]
fn community_channel_separates_within_and_cross_pairs() {
    let names = tickers(10);
    let params = vec![GbmParams::new(30.0, 0.0002, 0.012).unwrap(); 10];
    let communities = names.iter().enumerate().map(|(i, t)| (t.clone(), i / 5)).collect();
    let clustering = names.iter().map(|t| (t.clone(), 0.8)).collect();
    for seed in 0..50u64 {
        let walks = community_walks(&names, &params, &communities, &clustering, 251, seed).unwrap();
        let panel = PricePanel::new(names.clone(), weekdays(251), walks.paths).unwrap();
        let c = correlation_matrix(&log_returns(&panel).unwrap()).unwrap();
        let (mut within, mut cross) = (Vec::new(), Vec::new());
        for i in 0..10 {
            for j in (i + 1)..10 {
                if i / 5 == j / 5 { within.push(c.get(i, j)) } else { cross.push(c.get(i, j)) }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&within) > mean(&cross), "seed {seed}");
    }
}
