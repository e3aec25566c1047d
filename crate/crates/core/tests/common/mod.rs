//! Input generators shared by the integration tests.
#![allow(dead_code)]

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use netcorr::corrnet::{CorrMatrix, Edge, StockGraph};
use netcorr::linalg::Matrix;
use netcorr::market_data::PricePanel;
use netcorr::rng::{derive_key, CounterRng};

pub fn rng(parts: &[u64]) -> CounterRng {
    CounterRng::new(derive_key(parts))
}

pub fn tickers(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("S{i:03}")).collect()
}

pub fn weekdays(n: usize) -> Vec<NaiveDate> {
    let mut d = NaiveDate::from_ymd_opt(2015, 1, 5).unwrap();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

/// One-factor daily log-returns: `vol (ρ f_t + √(1-ρ²) e_it)`.
pub fn factor_returns(n: usize, t: usize, loading: f64, vol: f64, seed: u64) -> Matrix<f64> {
    let f = rng(&[seed, 1]);
    let e = rng(&[seed, 2]);
    let idio = (1.0 - loading * loading).sqrt();
    Matrix::from_fn(t, n, |k, i| {
        vol * (loading * f.normal(k as u64) + idio * e.normal((k * n + i) as u64))
    })
}

/// Prices `100 · exp(cumulative returns)` with a leading base row.
pub fn panel_from_returns(returns: &Matrix<f64>) -> PricePanel<f64> {
    let (t, n) = (returns.nrows(), returns.ncols());
    let mut prices = Matrix::zeros(t + 1, n);
    for i in 0..n {
        let mut x = 100f64.ln();
        prices[(0, i)] = 100.0;
        for k in 0..t {
            x += returns[(k, i)];
            prices[(k + 1, i)] = x.exp();
        }
    }
    PricePanel::new(tickers(n), weekdays(t + 1), prices).unwrap()
}

pub fn factor_panel(n: usize, days: usize, loading: f64, seed: u64) -> PricePanel<f64> {
    panel_from_returns(&factor_returns(n, days - 1, loading, 0.01, seed))
}

/// Random correlation matrix: normalised Gram matrix of `n × m` Gaussian
/// rows, with `m` random in `1..=2n` so low-rank cases appear too.
pub fn random_correlation(n: usize, seed: u64) -> CorrMatrix<f64> {
    let r = rng(&[seed, 3]);
    let m = 1 + r.below(0, 2 * n as u64) as usize;
    let x: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..m).map(|j| r.normal((1 + i * m + j) as u64)).collect())
        .collect();
    let gram = Matrix::from_fn(n, n, |i, j| x[i].iter().zip(&x[j]).map(|(a, b)| a * b).sum::<f64>());
    let values = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            gram[(i, j)] / (gram[(i, i)] * gram[(j, j)]).sqrt()
        }
    });
    CorrMatrix::new(tickers(n), values).unwrap()
}

pub fn graph(n: usize, edges: &[(usize, usize, f64)]) -> StockGraph<f64> {
    StockGraph::new(
        tickers(n),
        edges
            .iter()
            .map(|&(source, target, weight)| Edge { source, target, weight })
            .collect(),
        0.0,
    )
    .unwrap()
}

/// Erdős-Rényi graph with uniform weights in `[lo, hi)`.
pub fn random_graph(n: usize, p: f64, lo: f64, hi: f64, seed: u64) -> StockGraph<f64> {
    let r = rng(&[seed, 4]);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let k = (i * n + j) as u64;
            if r.uniform(2 * k) < p {
                edges.push((i, j, lo + (hi - lo) * r.uniform(2 * k + 1)));
            }
        }
    }
    graph(n, &edges)
}

/// Dense `|w|` adjacency.
pub fn dense_adjacency(g: &StockGraph<f64>) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut a = vec![vec![0.0; n]; n];
    for e in g.edges() {
        a[e.source][e.target] = e.weight.abs();
        a[e.target][e.source] = e.weight.abs();
    }
    a
}
