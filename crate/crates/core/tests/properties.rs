//! Property tests for the structural invariants of each stage.

mod common;

use std::collections::BTreeSet;

use common::*;
use netcorr::calibrate::{fit_weights, wasserstein_1d, GridSpec};
use netcorr::corrnet::{
    correlation_matrix, eigenvector_centrality, louvain_communities, modularity_of_labels, node_stats, pagerank,
    threshold_graph, CorrMatrix, Edge, StockGraph,
};
use netcorr::gbm::{blend_walks, own_seed, simulate_gbm_corr, BlendWeights, Channel, CorrChannelConfig};
use netcorr::linalg::{symmetric_eigen, Matrix};
use netcorr::market_data::{clean_universe, estimate_gbm_params, log_returns, GbmParams, PricePanel};
use netcorr::portfolio::{backtest, max_sharpe_weights, portfolio_stats, BacktestOptions, PortfolioWeights, Strategy as Rebalance};
use netcorr::spectral::{eigendecompose, influential_tickers, mode_projection, rescale_correlation};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn price_panel() -> impl Strategy<Value = PricePanel<f64>> {
    (1usize..6, 2usize..40).prop_flat_map(|(n, t)| {
        prop::collection::vec(0.01f64..1000.0, n * t).prop_map(move |v| {
            PricePanel::new(tickers(n), weekdays(t), Matrix::from_vec(t, n, v).unwrap()).unwrap()
        })
    })
}

fn scaled_graph(g: &StockGraph<f64>, k: f64) -> StockGraph<f64> {
    let edges = g
        .edges()
        .iter()
        .map(|e| Edge { weight: e.weight * k, ..*e })
        .collect();
    StockGraph::new(g.nodes().to_vec(), edges, 0.0).unwrap()
}

fn edge_set(g: &StockGraph<f64>) -> BTreeSet<(String, String)> {
    g.edges()
        .iter()
        .map(|e| (g.nodes()[e.source].clone(), g.nodes()[e.target].clone()))
        .collect()
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn log_returns_reconstruct_prices(panel in price_panel()) {
        let r = log_returns(&panel).unwrap();
        let s0 = panel.prices().row(0).to_vec();
        let back = r.reconstruct_prices(&s0);
        for t in 0..panel.n_dates() {
            for i in 0..panel.n_tickers() {
                let p = panel.prices()[(t, i)];
                prop_assert!((back[(t, i)] - p).abs() <= 1e-12 * p * (1.0 + t as f64));
            }
        }
    }

    #[test]
    fn clean_universe_is_idempotent(panel in price_panel(), holes in prop::collection::vec((0usize..40, 0usize..6), 0..4)) {
        let mut prices = panel.prices().clone();
        for (t, i) in holes {
            if t < prices.nrows() && i < prices.ncols() && i > 0 {
                prices[(t, i)] = f64::NAN;
            }
        }
        let gappy = PricePanel::new(panel.tickers().to_vec(), panel.dates().to_vec(), prices).unwrap();
        let once = clean_universe(&gappy).unwrap();
        prop_assert!(once.is_complete());
        prop_assert_eq!(clean_universe(&once).unwrap(), once);
    }

    #[test]
    fn gbm_estimates_are_scale_invariant(panel in price_panel(), k in 0.01f64..100.0) {
        prop_assume!(panel.n_dates() >= 3);
        let series = panel.series(0);
        let scaled: Vec<f64> = series.iter().map(|p| p * k).collect();
        let a = estimate_gbm_params(&series, 0..series.len()).unwrap();
        let b = estimate_gbm_params(&scaled, 0..scaled.len()).unwrap();
        prop_assert!((a.mu - b.mu).abs() < 1e-9);
        prop_assert!((a.sigma - b.sigma).abs() < 1e-9);
        prop_assert!((b.s0 - k * a.s0).abs() <= 1e-12 * b.s0);
    }

    #[test]
    fn gbm_paths_are_reproducible_and_positive(seed in any::<u64>(), c in -1.0f64..=1.0, sigma in 0.0f64..0.2) {
        let params = GbmParams::new(10.0, 0.001, sigma).unwrap();
        let cfg = CorrChannelConfig::new(c, 4376).unwrap();
        let own = own_seed(seed, Channel::Market, "AAA");
        let a = simulate_gbm_corr(&params, 60, &cfg, own, seed);
        let b = simulate_gbm_corr(&params, 60, &cfg, own, seed);
        prop_assert_eq!(&a, &b);
        prop_assert!(a.iter().all(|&p| p > 0.0));
        prop_assert_eq!(a[0], 10.0);
    }

    #[test]
    fn shared_stream_ties_fully_coupled_stocks(seed in any::<u64>(), channel in any::<u64>()) {
        let params = GbmParams::new(5.0, 0.0, 0.02).unwrap();
        let cfg = CorrChannelConfig::new(1.0, channel).unwrap();
        let a = simulate_gbm_corr(&params, 40, &cfg, own_seed(seed, Channel::Community, "A"), seed);
        let b = simulate_gbm_corr(&params, 40, &cfg, own_seed(seed, Channel::Community, "B"), seed);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn blend_weights_sum_to_one(w in prop::collection::vec(0.0f64..10.0, 3)) {
        prop_assume!(w.iter().sum::<f64>() > 1e-6);
        let b = BlendWeights::new(w[0], w[1], w[2]).unwrap();
        prop_assert!((b.to_vec().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn blend_of_positive_paths_stays_within_bounds(a in prop::collection::vec(0.1f64..10.0, 5), b in prop::collection::vec(0.1f64..10.0, 5), w in 0.01f64..1.0) {
        let out = blend_walks(&[(w, a.as_slice()), (1.0 - w + 0.01, b.as_slice())]).unwrap();
        for k in 0..5 {
            prop_assert!(out[k] >= a[k].min(b[k]) - 1e-12 && out[k] <= a[k].max(b[k]) + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn correlation_is_psd_with_unit_diagonal(n in 2usize..12, t in 3usize..40, loading in 0.0f64..0.95, seed in any::<u64>()) {
        let panel = panel_from_returns(&factor_returns(n, t, loading, 0.01, seed));
        let c = correlation_matrix(&log_returns(&panel).unwrap()).unwrap();
        let v = c.values();
        prop_assert!(v.max_asymmetry() == 0.0);
        for i in 0..n {
            prop_assert!((v[(i, i)] - 1.0).abs() < 1e-12);
        }
        let eig = symmetric_eigen(v).unwrap();
        prop_assert!(*eig.values.last().unwrap() > -1e-10);
    }

    #[test]
    fn threshold_edges_shrink_as_rho_grows(n in 3usize..15, seed in any::<u64>(), lo in 0.0f64..1.0, hi in 0.0f64..1.0) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let c = random_correlation(n, seed);
        let loose = edge_set(&threshold_graph(&c, lo).unwrap());
        let tight = edge_set(&threshold_graph(&c, hi).unwrap());
        prop_assert!(tight.is_subset(&loose));
    }

    #[test]
    fn louvain_is_at_least_as_modular_as_singletons(n in 2usize..25, p in 0.1f64..0.9, seed in any::<u64>()) {
        let g = random_graph(n, p, 0.5, 1.0, seed);
        let q = modularity_of_labels(&g, &louvain_communities(&g, seed));
        let singletons: Vec<usize> = (0..n).collect();
        prop_assert!(q >= modularity_of_labels(&g, &singletons) - 1e-12);
    }

    #[test]
    fn centrality_ignores_weight_scale(n in 3usize..20, seed in any::<u64>(), k in 0.1f64..10.0) {
        let g = random_graph(n, 0.5, 0.2, 1.0, seed);
        prop_assume!(g.edge_count() > 0);
        let s = scaled_graph(&g, k);
        let (a, b) = (eigenvector_centrality(&g).unwrap(), eigenvector_centrality(&s).unwrap());
        let (pa, pb) = (pagerank(&g, 0.85).unwrap(), pagerank(&s, 0.85).unwrap());
        for i in 0..n {
            prop_assert!((a[i] - b[i]).abs() < 1e-8);
            prop_assert!((pa[i] - pb[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn market_selection_ignores_weight_scale(n in 10usize..40, seed in any::<u64>(), k in 0.1f64..10.0) {
        let g = random_graph(n, 0.3, 0.2, 1.0, seed);
        prop_assume!(g.edge_count() > 0);
        let a = influential_tickers(&node_stats(&g, 0).unwrap(), 0.2);
        let b = influential_tickers(&node_stats(&scaled_graph(&g, k), 0).unwrap(), 0.2);
        prop_assert_eq!(a.ok(), b.ok());
    }

    #[test]
    fn spectral_split_is_exact(n in 2usize..30, seed in any::<u64>(), cut in 0usize..30) {
        let c = random_correlation(n, seed);
        let split = eigendecompose(&c).unwrap();
        let trace: f64 = split.eigenvalues.iter().sum();
        prop_assert!((trace - n as f64).abs() < 1e-9);
        let k = cut.min(n);
        let top: Vec<usize> = (0..k).collect();
        let rest: Vec<usize> = (k..n).collect();
        let sum = mode_projection(&split, &top).unwrap().add(&mode_projection(&split, &rest).unwrap());
        prop_assert!(sum.max_abs_diff(c.values()) < 1e-9);
    }

    #[test]
    fn rescaling_restores_unit_diagonal(n in 2usize..20, seed in any::<u64>(), k in 1usize..5) {
        let c = random_correlation(n, seed);
        let split = eigendecompose(&c).unwrap();
        let idx: Vec<usize> = (0..k.min(n)).collect();
        let r = rescale_correlation(&mode_projection(&split, &idx).unwrap());
        for i in 0..n {
            if r.defined[i] {
                prop_assert_eq!(r.values[(i, i)], 1.0);
                for j in 0..n {
                    if r.defined[j] {
                        prop_assert!(r.values[(i, j)].abs() <= 1.0 + 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn wasserstein_is_a_translation_invariant_metric(
        a in prop::collection::vec(-5.0f64..5.0, 1..30),
        b in prop::collection::vec(-5.0f64..5.0, 1..30),
        c in prop::collection::vec(-5.0f64..5.0, 1..30),
        shift in -3.0f64..3.0,
    ) {
        let ab = wasserstein_1d(&a, &b).unwrap();
        prop_assert_eq!(ab, wasserstein_1d(&b, &a).unwrap());
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(wasserstein_1d(&a, &a).unwrap(), 0.0);
        let tri = wasserstein_1d(&a, &c).unwrap() + wasserstein_1d(&c, &b).unwrap();
        prop_assert!(ab <= tri + 1e-12);
        let sa: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let sb: Vec<f64> = b.iter().map(|x| x + shift).collect();
        prop_assert!((wasserstein_1d(&sa, &sb).unwrap() - ab).abs() < 1e-9);
    }
}

fn covariance(n: usize, seed: u64) -> Matrix<f64> {
    let r = rng(&[seed, 90]);
    let m = n + 2;
    let f: Vec<f64> = (0..n * m).map(|k| 0.1 * r.normal(k as u64)).collect();
    Matrix::from_fn(n, n, |i, j| (0..m).map(|k| f[i * m + k] * f[j * m + k]).sum::<f64>() / m as f64)
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn max_sharpe_respects_constraints_and_dominates(n in 1usize..8, seed in any::<u64>(), mins in prop::bool::ANY) {
        let r = rng(&[seed, 91]);
        let mut mu: Vec<f64> = (0..n).map(|i| 0.02 * r.normal(i as u64)).collect();
        mu[0] = mu[0].abs() + 1e-3;
        let cov = covariance(n, seed);
        let l = if mins { 0.0005 } else { 0.0 };
        let names = tickers(n);
        let w = max_sharpe_weights(&names, &mu, &cov, 0.0, l).unwrap();
        prop_assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        prop_assert!(w.weights.iter().all(|&x| x >= l - 1e-8));
        let sharpe = |weights: Vec<f64>| {
            portfolio_stats(&PortfolioWeights { tickers: names.clone(), weights }, &mu, &cov, 0.0).unwrap().sharpe
        };
        let best = sharpe(w.weights.clone());
        prop_assert!(best >= sharpe(vec![1.0 / n as f64; n]) - 1e-9 * best.abs().max(1.0));
        for k in 0..n {
            let mut corner = vec![l; n];
            corner[k] = 1.0 - l * (n - 1) as f64;
            prop_assert!(best >= sharpe(corner) - 1e-9 * best.abs().max(1.0));
        }
    }

    #[test]
    fn max_sharpe_ignores_covariance_scale(n in 2usize..8, seed in any::<u64>(), k in 0.01f64..100.0) {
        let r = rng(&[seed, 92]);
        let mu: Vec<f64> = (0..n).map(|i| 0.01 + 0.02 * r.uniform(i as u64)).collect();
        let cov = covariance(n, seed);
        let scaled = Matrix::from_fn(n, n, |i, j| k * cov[(i, j)]);
        let names = tickers(n);
        let a = max_sharpe_weights(&names, &mu, &cov, 0.0, 0.0005).unwrap();
        let b = max_sharpe_weights(&names, &mu, &scaled, 0.0, 0.0005).unwrap();
        for i in 0..n {
            prop_assert!((a.weights[i] - b.weights[i]).abs() < 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn backtest_compounds_period_returns(n in 1usize..6, days in 30usize..90, dt in 5usize..20, seed in any::<u64>()) {
        let panel = factor_panel(n, days, 0.4, seed);
        let report = backtest(&panel, dt, Rebalance::Historical, &BacktestOptions::default()).unwrap();
        prop_assert_eq!(report.period_returns.len(), report.cumulative.len());
        let mut growth = 1.0;
        for (r, c) in report.period_returns.iter().zip(&report.cumulative) {
            growth *= 1.0 + r;
            prop_assert!((growth - 1.0 - c).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_is_deterministic(target in prop::collection::vec(-1.0f64..1.0, 5..40), seeds in prop::collection::vec(any::<u64>(), 1..3)) {
        // Entries shift with the weights and wobble with the seed.
        let sim = |w: &BlendWeights<f64>, s: u64| -> netcorr::Result<Vec<f64>> {
            let jitter = (s % 7) as f64 * 0.01;
            Ok(target.iter().map(|x| 0.5 * x + w.market - w.noise + jitter).collect())
        };
        let grid = GridSpec::with_step(0.1).unwrap();
        let active = [Channel::Community, Channel::Market, Channel::Noise];
        let a = fit_weights(&target, sim, &active, grid, &seeds).unwrap();
        let b = fit_weights(&target, sim, &active, grid, &seeds).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn corr_matrix_of_identical_series_is_ones() {
    let panel = factor_panel(1, 50, 0.0, 1);
    let p = panel.prices();
    let doubled = Matrix::from_fn(50, 2, |t, _| p[(t, 0)]);
    let panel = PricePanel::new(tickers(2), weekdays(50), doubled).unwrap();
    let c: CorrMatrix<f64> = correlation_matrix(&log_returns(&panel).unwrap()).unwrap();
    assert!((c.get(0, 1) - 1.0).abs() < 1e-12);
}
