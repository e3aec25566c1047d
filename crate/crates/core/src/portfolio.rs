//! Max-Sharpe weights and a walk-forward rebalancing backtest.
//!
//! With a minimum weight `l`, every feasible portfolio is
//! `w = l·1 + (1 - N l) v` for `v` on the simplex, i.e. `w ∝ B v` with
//! `B = I + c 11ᵀ`, `c = l / (1 - N l)`. The Sharpe ratio is scale free, so
//! maximising it over `v ≥ 0` is the quadratic program
//! `min zᵀ (BΣB) z` subject to `(B a)ᵀ z = 1, z ≥ 0` with `a = μ - r_f`,
//! and `v = z / 1ᵀz`. The QP is solved by a primal active-set method, with
//! accelerated projected gradient as a fallback.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corrnet::{correlation_matrix, node_stats, threshold_graph};
use crate::error::{Error, Result};
use crate::gbm::{universe_labels, BlendWeights, EnsembleBuilder};
use crate::linalg::{cholesky, cholesky_solve, sample_covariance, Matrix};
use crate::market_data::{estimate_gbm_params, log_returns, PricePanel};
use crate::rng::derive_key;
use crate::scalar::Real;
use crate::spectral::{influential_tickers, DEFAULT_TOP_FRACTION};

pub const DEFAULT_MIN_WEIGHT: f64 = 0.0005;
/// Rebalance intervals in trading days: 252 / {1, 2, 3, 4, 6, 8}, rounded.
pub const DEFAULT_DT_GRID: [usize; 6] = [252, 126, 84, 63, 42, 31];

const RIDGE: f64 = 1e-12;
const FISTA_MAX_ITER: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortfolioWeights<T> {
    pub tickers: Vec<String>,
    pub weights: Vec<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortfolioStats<T> {
    pub expected_return: T,
    pub sigma: T,
    /// `(R_P - r_f) / σ_P`; ±∞ when σ_P = 0 and the excess return is non-zero.
    pub sharpe: T,
}

/// `R_P = wᵀR`, `σ_P = √(wᵀ Cov w)` and the Sharpe ratio.
pub fn portfolio_stats<T: Real>(
    weights: &PortfolioWeights<T>,
    expected_returns: &[T],
    cov: &Matrix<T>,
    r_f: T,
) -> Result<PortfolioStats<T>> {
    let n = weights.weights.len();
    if expected_returns.len() != n || cov.nrows() != n || cov.ncols() != n {
        return Err(Error::Dimension(format!(
            "{n} weights, {} expected returns, {}x{} covariance",
            expected_returns.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    let w = &weights.weights;
    let ret: T = w.iter().zip(expected_returns).map(|(&a, &b)| a * b).sum();
    let var = cov.quad_form(w).max(T::zero());
    let sigma = var.sqrt();
    let excess = ret - r_f;
    let sharpe = if sigma > T::zero() {
        excess / sigma
    } else if excess > T::zero() {
        T::infinity()
    } else if excess < T::zero() {
        T::neg_infinity()
    } else {
        T::zero()
    };
    Ok(PortfolioStats {
        expected_return: ret,
        sigma,
        sharpe,
    })
}

/// Long-only max-Sharpe weights with every weight at least `min_weight`.
/// Internally solved in f64.
pub fn max_sharpe_weights<T: Real>(
    tickers: &[String],
    expected_returns: &[T],
    cov: &Matrix<T>,
    r_f: T,
    min_weight: T,
) -> Result<PortfolioWeights<T>> {
    let n = tickers.len();
    if n == 0 || expected_returns.len() != n || cov.nrows() != n || cov.ncols() != n {
        return Err(Error::Dimension(format!(
            "{n} tickers, {} expected returns, {}x{} covariance",
            expected_returns.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    let l = min_weight.as_f64();
    let nl = n as f64 * l;
    if !(l >= 0.0) || nl > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "min_weight {l} is infeasible for {n} assets"
        )));
    }
    let a: Vec<f64> = expected_returns.iter().map(|&m| (m - r_f).as_f64()).collect();
    if a.iter().any(|x| !x.is_finite()) || cov.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite solver inputs".into()));
    }
    if !a.iter().any(|&x| x > 0.0) {
        return Err(Error::Infeasible("no asset has expected return above the risk-free rate".into()));
    }
    let wrap = |w: Vec<f64>| PortfolioWeights {
        tickers: tickers.to_vec(),
        weights: w.into_iter().map(T::lit).collect(),
    };
    if nl >= 1.0 - 1e-12 {
        return Ok(wrap(vec![1.0 / n as f64; n]));
    }
    let c = l / (1.0 - nl);
    let sigma = Matrix::from_fn(n, n, |i, j| cov[(i, j)].as_f64());
    let s: Vec<f64> = (0..n).map(|i| sigma.row(i).iter().sum()).collect();
    let total: f64 = s.iter().sum();
    let mut h = Matrix::from_fn(n, n, |i, j| {
        sigma[(i, j)] + c * (s[i] + s[j]) + c * c * total
    });
    let sum_a: f64 = a.iter().sum();
    let b: Vec<f64> = a.iter().map(|&x| x + c * sum_a).collect();
    if !b.iter().any(|&x| x > 0.0) {
        return Err(Error::Infeasible(
            "no portfolio satisfying the minimum weight beats the risk-free rate".into(),
        ));
    }
    let max_diag = (0..n).map(|i| h[(i, i)]).fold(0.0, f64::max);
    let ridge = if max_diag > 0.0 { RIDGE * max_diag } else { 1.0 };
    for i in 0..n {
        h[(i, i)] += ridge;
    }
    let z = match active_set(&h, &b) {
        Some(z) => z,
        None => fista(&h, &b)?,
    };
    let sz: f64 = z.iter().sum();
    let w: Vec<f64> = z.iter().map(|&zi| (1.0 - nl) * zi / sz + l).collect();
    let norm: f64 = w.iter().sum();
    Ok(wrap(w.into_iter().map(|x| x / norm).collect()))
}

fn sub_matrix(h: &Matrix<f64>, idx: &[usize]) -> Matrix<f64> {
    Matrix::from_fn(idx.len(), idx.len(), |i, j| h[(idx[i], idx[j])])
}

/// Primal active-set method for `min ½ zᵀHz, bᵀz = 1, z ≥ 0` with H positive
/// definite. Returns `None` when it fails to terminate cleanly.
fn active_set(h: &Matrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    // Start at the best single-asset vertex.
    let k0 = (0..n)
        .filter(|&k| b[k] > 0.0)
        .max_by(|&i, &j| {
            let si = b[i] / h[(i, i)].sqrt();
            let sj = b[j] / h[(j, j)].sqrt();
            si.partial_cmp(&sj).unwrap_or(std::cmp::Ordering::Equal).then(j.cmp(&i))
        })?;
    let mut z = vec![0.0; n];
    z[k0] = 1.0 / b[k0];
    let mut free = vec![k0];
    for _ in 0..(20 * n + 100) {
        let l = cholesky(&sub_matrix(h, &free))?;
        let bf: Vec<f64> = free.iter().map(|&i| b[i]).collect();
        let x = cholesky_solve(&l, &bf);
        let denom: f64 = bf.iter().zip(&x).map(|(p, q)| p * q).sum();
        if !(denom > 0.0) {
            return None;
        }
        let nu = 1.0 / denom;
        let target: Vec<f64> = x.iter().map(|v| v * nu).collect();
        if target.iter().all(|&v| v >= 0.0) {
            for (k, &i) in free.iter().enumerate() {
                z[i] = target[k];
            }
            let hz = h.mul_vec(&z);
            let scale = hz.iter().map(|v| v.abs()).fold(0.0, f64::max)
                + nu.abs() * b.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let tol = 1e-13 * scale;
            let entering = (0..n)
                .filter(|i| !free.contains(i))
                .map(|i| (i, hz[i] - nu * b[i]))
                .filter(|&(_, g)| g < -tol)
                .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap_or(std::cmp::Ordering::Equal));
            match entering {
                None => return Some(z),
                Some((i, _)) => free.push(i),
            }
        } else {
            // Step towards the target until the first free variable hits zero.
            let mut alpha = 1.0;
            let mut blocking = 0;
            for (k, &i) in free.iter().enumerate() {
                if target[k] < 0.0 {
                    let r = z[i] / (z[i] - target[k]);
                    if r < alpha {
                        alpha = r;
                        blocking = k;
                    }
                }
            }
            for (k, &i) in free.iter().enumerate() {
                z[i] += alpha * (target[k] - z[i]);
            }
            z[free[blocking]] = 0.0;
            free.remove(blocking);
            free.retain(|&i| {
                if z[i] <= 0.0 {
                    z[i] = 0.0;
                    false
                } else {
                    true
                }
            });
            if free.is_empty() {
                return None;
            }
        }
    }
    None
}

/// Euclidean projection onto `{z ≥ 0, bᵀz = 1}`: `z = max(y - τb, 0)` with τ
/// found by bisection (`bᵀz(τ)` is non-increasing).
fn project(y: &[f64], b: &[f64]) -> Vec<f64> {
    let at = |tau: f64| -> f64 {
        y.iter()
            .zip(b)
            .map(|(&yi, &bi)| bi * (yi - tau * bi).max(0.0))
            .sum()
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    while at(lo) < 1.0 {
        lo *= 2.0;
    }
    while at(hi) > 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    y.iter().zip(b).map(|(&yi, &bi)| (yi - tau * bi).max(0.0)).collect()
}

fn fista(h: &Matrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let lip = (0..n)
        .map(|i| h.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut x = project(&vec![0.0; n], b);
    let mut y = x.clone();
    let mut t: f64 = 1.0;
    let mut change = f64::INFINITY;
    for _ in 0..FISTA_MAX_ITER {
        let g = h.mul_vec(&y);
        let step: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - gi / lip).collect();
        let next = project(&step, b);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let size = next.iter().map(|v| v.abs()).fold(0.0, f64::max);
        change = next
            .iter()
            .zip(&x)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        y = next
            .iter()
            .zip(&x)
            .map(|(p, q)| p + (t - 1.0) / t_next * (p - q))
            .collect();
        x = next;
        t = t_next;
        if change <= 1e-14 * (1.0 + size) {
            return Ok(x);
        }
    }
    Err(Error::SolverFailure {
        iterations: FISTA_MAX_ITER,
        residual: change,
    })
}

/// Inputs to the simulated-market strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulatedMarketConfig {
    pub rho_c: f64,
    pub top_fraction: f64,
    pub weights: BlendWeights<f64>,
    /// Ensemble length in price points; defaults to the window length.
    pub sim_steps: Option<usize>,
    pub louvain_seed: u64,
}

impl Default for SimulatedMarketConfig {
    fn default() -> Self {
        Self {
            rho_c: 0.9,
            top_fraction: DEFAULT_TOP_FRACTION,
            weights: BlendWeights {
                community: 0.26,
                market: 0.74,
                noise: 0.0,
            },
            sim_steps: None,
            louvain_seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Strategy {
    Historical,
    SimulatedMarket { seed: u64 },
}

impl Strategy {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Historical => "historical",
            Self::SimulatedMarket { .. } => "simulated",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BacktestOptions {
    pub r_f: f64,
    pub min_weight: f64,
    pub sim: Option<SimulatedMarketConfig>,
}

impl Default for BacktestOptions {
    fn default() -> Self {
        Self {
            r_f: 0.0,
            min_weight: DEFAULT_MIN_WEIGHT,
            sim: Some(SimulatedMarketConfig::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodFailure {
    pub date: NaiveDate,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport<T> {
    pub strategy: String,
    pub seed: Option<u64>,
    pub dt: usize,
    pub rebalance_dates: Vec<NaiveDate>,
    /// Last date of each holding period.
    pub period_end_dates: Vec<NaiveDate>,
    pub period_returns: Vec<T>,
    /// `Π_{j ≤ k} (1 + r_j) - 1`.
    pub cumulative: Vec<T>,
    pub failures: Vec<PeriodFailure>,
}

impl<T: Real> BacktestReport<T> {
    pub fn final_return(&self) -> T {
        self.cumulative.last().copied().unwrap_or_else(T::zero)
    }
}

impl<T: Real + Serialize> BacktestReport<T> {
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}

fn compound<T: Real>(returns: &[T]) -> Vec<T> {
    let mut growth = T::one();
    returns
        .iter()
        .map(|&r| {
            growth = growth * (T::one() + r);
            growth - T::one()
        })
        .collect()
}

fn simple_returns<T: Real>(prices: &Matrix<T>) -> Matrix<T> {
    Matrix::from_fn(prices.nrows() - 1, prices.ncols(), |t, i| {
        prices[(t + 1, i)] / prices[(t, i)] - T::one()
    })
}

fn column_means<T: Real>(m: &Matrix<T>) -> Vec<T> {
    let n = T::from_usize_lossy(m.nrows());
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|t| m[(t, j)]).sum::<T>() / n)
        .collect()
}

fn historical_inputs<T: Real>(window: &PricePanel<T>) -> (Vec<T>, Matrix<T>) {
    let r = simple_returns(window.prices());
    (column_means(&r), sample_covariance(&r))
}

fn simulated_inputs<T: Real>(
    window: &PricePanel<T>,
    config: &SimulatedMarketConfig,
    master_seed: u64,
) -> Result<(Vec<T>, Matrix<T>)> {
    let corr = correlation_matrix(&log_returns(window)?)?;
    let graph = threshold_graph(&corr, T::lit(config.rho_c))?;
    let stats = node_stats(&graph, config.louvain_seed)?;
    let tickers = window.tickers().to_vec();
    let params = (0..window.n_tickers())
        .map(|i| estimate_gbm_params(&window.series(i), 0..window.n_dates()))
        .collect::<Result<Vec<_>>>()?;
    let steps = config.sim_steps.unwrap_or(window.n_dates());
    let mut builder = EnsembleBuilder::new(tickers.clone(), params, steps)?;
    let w = &config.weights;
    if w.community > 0.0 {
        let (communities, clustering) = universe_labels(&tickers, &stats);
        builder = builder.with_communities(&communities, &clustering)?;
    }
    if w.market > 0.0 {
        let market = influential_tickers(&stats, config.top_fraction)?;
        builder = builder.with_market(&corr, &market)?;
    }
    let weights = BlendWeights::new(T::lit(w.community), T::lit(w.market), T::lit(w.noise))?;
    let ensemble = builder.components(master_seed)?.blend(&weights)?;
    let log_r = crate::gbm::ensemble_log_returns(&ensemble);
    let expected = column_means(&log_r).into_iter().map(|m| m.exp() - T::one()).collect();
    let simple = Matrix::from_fn(log_r.nrows(), log_r.ncols(), |t, i| log_r[(t, i)].exp() - T::one());
    Ok((expected, sample_covariance(&simple)))
}

/// Walk-forward backtest. Rebalance dates are every `dt` trading days from
/// index `dt`; weights come from the trailing window of `dt + 1` prices and
/// are held for the next `dt` days (the last period may be shorter). Failed
/// periods keep the previous weights (equal weights before the first
/// success) and are listed in the report.
pub fn backtest<T: Real>(
    panel: &PricePanel<T>,
    dt: usize,
    strategy: Strategy,
    options: &BacktestOptions,
) -> Result<BacktestReport<T>> {
    if dt < 2 {
        return Err(Error::InvalidArgument(format!("dt must be at least 2 days, got {dt}")));
    }
    let n_days = panel.n_dates();
    if n_days < dt + 2 {
        return Err(Error::InsufficientData(format!(
            "backtest with dt = {dt} needs at least {} days, panel has {n_days}",
            dt + 2
        )));
    }
    if !panel.is_complete() {
        return Err(Error::InvalidArgument("backtest panel has missing prices".into()));
    }
    let sim_config = match strategy {
        Strategy::SimulatedMarket { .. } => Some(
            options
                .sim
                .as_ref()
                .ok_or_else(|| Error::Config("simulated strategy needs a simulation config".into()))?,
        ),
        Strategy::Historical => None,
    };
    let n = panel.n_tickers();
    let r_f = T::lit(options.r_f);
    let min_weight = T::lit(options.min_weight);
    let mut weights: Vec<T> = vec![T::one() / T::from_usize_lossy(n); n];
    let mut report = BacktestReport {
        strategy: strategy.label().to_string(),
        seed: match strategy {
            Strategy::SimulatedMarket { seed } => Some(seed),
            Strategy::Historical => None,
        },
        dt,
        rebalance_dates: Vec::new(),
        period_end_dates: Vec::new(),
        period_returns: Vec::new(),
        cumulative: Vec::new(),
        failures: Vec::new(),
    };
    let mut k = dt;
    while k < n_days - 1 {
        let window = panel.slice_dates(k - dt..k + 1);
        let inputs = match (strategy, sim_config) {
            (Strategy::SimulatedMarket { seed }, Some(cfg)) => {
                simulated_inputs(&window, cfg, derive_key(&[seed, k as u64]))
            }
            _ => Ok(historical_inputs(&window)),
        };
        let solved = inputs.and_then(|(mu, cov)| {
            max_sharpe_weights(panel.tickers(), &mu, &cov, r_f, min_weight)
        });
        match solved {
            Ok(w) => weights = w.weights,
            Err(e) => report.failures.push(PeriodFailure {
                date: panel.dates()[k],
                message: e.to_string(),
            }),
        }
        let end = (k + dt).min(n_days - 1);
        let p = panel.prices();
        let ret: T = (0..n)
            .map(|i| weights[i] * (p[(end, i)] / p[(k, i)] - T::one()))
            .sum();
        report.rebalance_dates.push(panel.dates()[k]);
        report.period_end_dates.push(panel.dates()[end]);
        report.period_returns.push(ret);
        k += dt;
    }
    report.cumulative = compound(&report.period_returns);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtComparison<T> {
    pub dt: usize,
    pub historical: BacktestReport<T>,
    pub simulated: Vec<BacktestReport<T>>,
    pub historical_return: T,
    pub simulated_mean: T,
    pub simulated_min: T,
    pub simulated_max: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport<T> {
    pub base_seed: u64,
    pub n_runs: usize,
    pub results: Vec<DtComparison<T>>,
}

/// Runs both strategies at every `dt`; the simulated strategy is repeated
/// `n_runs` times with seeds `base_seed + run`.
pub fn compare_strategies<T: Real>(
    panel: &PricePanel<T>,
    dts: &[usize],
    n_runs: usize,
    base_seed: u64,
    options: &BacktestOptions,
) -> Result<ComparisonReport<T>> {
    if n_runs == 0 {
        return Err(Error::InvalidArgument("n_runs must be at least 1".into()));
    }
    let jobs: Vec<(usize, Option<usize>)> = dts
        .iter()
        .flat_map(|&dt| std::iter::once((dt, None)).chain((0..n_runs).map(move |r| (dt, Some(r)))))
        .collect();
    let reports: Vec<Result<BacktestReport<T>>> = jobs
        .par_iter()
        .map(|&(dt, run)| {
            let strategy = match run {
                None => Strategy::Historical,
                Some(r) => Strategy::SimulatedMarket {
                    seed: base_seed.wrapping_add(r as u64),
                },
            };
            backtest(panel, dt, strategy, options)
        })
        .collect();
    let mut by_dt: BTreeMap<usize, (Option<BacktestReport<T>>, Vec<BacktestReport<T>>)> = BTreeMap::new();
    for (&(dt, run), rep) in jobs.iter().zip(reports) {
        let rep = rep?;
        let entry = by_dt.entry(dt).or_default();
        match run {
            None => entry.0 = Some(rep),
            Some(_) => entry.1.push(rep),
        }
    }
    let results = dts
        .iter()
        .map(|dt| {
            let (hist, sims) = by_dt[dt].clone();
            let hist = hist.expect("historical run scheduled");
            let finals: Vec<T> = sims.iter().map(BacktestReport::final_return).collect();
            DtComparison {
                dt: *dt,
                historical_return: hist.final_return(),
                simulated_mean: finals.iter().copied().sum::<T>() / T::from_usize_lossy(finals.len()),
                simulated_min: finals.iter().copied().fold(T::infinity(), T::min),
                simulated_max: finals.iter().copied().fold(T::neg_infinity(), T::max),
                historical: hist,
                simulated: sims,
            }
        })
        .collect();
    Ok(ComparisonReport {
        base_seed,
        n_runs,
        results,
    })
}

impl<T: Real + Serialize> ComparisonReport<T> {
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}

/// Cumulative-return series, `date,strategy,run,cum_return`. Historical rows
/// use run 0.
pub fn write_cumulative_csv<T: Real, W: Write>(comparison: &DtComparison<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "strategy", "run", "cum_return"])?;
    let runs = std::iter::once((0, &comparison.historical))
        .chain(comparison.simulated.iter().enumerate());
    for (run, rep) in runs {
        for (d, c) in rep.period_end_dates.iter().zip(&rep.cumulative) {
            w.write_record([
                d.to_string(),
                rep.strategy.clone(),
                run.to_string(),
                format!("{:e}", c),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
