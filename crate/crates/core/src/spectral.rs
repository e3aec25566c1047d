//! Spectrum of the correlation matrix, the Marchenko-Pastur noise baseline,
//! network-driven market-mode selection and market/noise reconstruction.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corrnet::{CorrMatrix, NodeStats};
use crate::error::{Error, Result};
use crate::histogram::Histogram;
use crate::linalg::{symmetric_eigen, Matrix};
use crate::scalar::Real;

pub const DEFAULT_TOP_FRACTION: f64 = 0.03;
pub const UNDEFINED_DIAGONAL: f64 = 1e-12;

/// Eigenvalues (descending) and eigenvectors of a correlation matrix, plus
/// the market-mode partition once selected.
#[derive(Clone, Debug)]
pub struct SpectralSplit<T> {
    pub tickers: Vec<String>,
    pub eigenvalues: Vec<T>,
    /// Column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: Matrix<T>,
    pub market_indices: Vec<usize>,
    /// Influential stocks that set the number of market modes.
    pub market_tickers: Vec<String>,
}

impl<T: Real> SpectralSplit<T> {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_market(&self) -> usize {
        self.market_indices.len()
    }

    pub fn noise_indices(&self) -> Vec<usize> {
        let market: BTreeSet<usize> = self.market_indices.iter().copied().collect();
        (0..self.n()).filter(|k| !market.contains(k)).collect()
    }

    pub fn is_market(&self, k: usize) -> bool {
        self.market_indices.contains(&k)
    }

    /// `index,eigenvalue,is_market`.
    pub fn write_spectrum_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["index", "eigenvalue", "is_market"])?;
        for (k, v) in self.eigenvalues.iter().enumerate() {
            w.write_record([k.to_string(), format!("{v:e}"), self.is_market(k).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Full symmetric eigendecomposition, eigenvalues descending.
pub fn eigendecompose<T: Real>(corr: &CorrMatrix<T>) -> Result<SpectralSplit<T>> {
    eigendecompose_matrix(corr.values(), corr.tickers().to_vec())
}

pub fn eigendecompose_matrix<T: Real>(m: &Matrix<T>, tickers: Vec<String>) -> Result<SpectralSplit<T>> {
    let scale = m.as_slice().iter().fold(T::one(), |acc, v| acc.max(v.abs()));
    let asym = m.max_asymmetry();
    if asym > T::lit(1e-12).max(T::epsilon() * T::lit(100.0)) * scale {
        return Err(Error::NonSymmetric {
            asymmetry: asym.as_f64(),
        });
    }
    if tickers.len() != m.nrows() {
        return Err(Error::Dimension(format!(
            "{} tickers for a {}x{} matrix",
            tickers.len(),
            m.nrows(),
            m.ncols()
        )));
    }
    let eig = symmetric_eigen(m)?;
    Ok(SpectralSplit {
        tickers,
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
        market_indices: Vec::new(),
        market_tickers: Vec::new(),
    })
}

/// Marchenko-Pastur parameters with `q = T / N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpParams<T> {
    pub q: T,
    pub sigma2: T,
    pub lambda_minus: T,
    pub lambda_plus: T,
}

impl<T: Real> MpParams<T> {
    pub fn new(q: T, sigma2: T) -> Result<Self> {
        let (lambda_minus, lambda_plus) = mp_edges(q, sigma2)?;
        Ok(Self {
            q,
            sigma2,
            lambda_minus,
            lambda_plus,
        })
    }

    pub fn contains(&self, lambda: T) -> bool {
        lambda >= self.lambda_minus && lambda <= self.lambda_plus
    }
}

/// Which count of observations enters `q = T / N`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObsConvention {
    /// Number of return observations (T_days - 1).
    #[default]
    Returns,
    /// Number of price dates.
    Prices,
}

impl ObsConvention {
    pub fn q_ratio<T: Real>(self, n_returns: usize, n_stocks: usize) -> T {
        let t = match self {
            Self::Returns => n_returns,
            Self::Prices => n_returns + 1,
        };
        T::from_usize_lossy(t) / T::from_usize_lossy(n_stocks)
    }
}

/// Spectrum edges `σ² (1 ± √(1/Q))²`.
pub fn mp_edges<T: Real>(q: T, sigma2: T) -> Result<(T, T)> {
    if !(q > T::zero()) || !(sigma2 > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "Marchenko-Pastur edges need q > 0 and sigma2 > 0 (q = {q}, sigma2 = {sigma2})"
        )));
    }
    let r = (T::one() / q).sqrt();
    let lo = sigma2 * (T::one() - r) * (T::one() - r);
    let hi = sigma2 * (T::one() + r) * (T::one() + r);
    Ok((lo, hi))
}

/// Marchenko-Pastur density, zero outside `[λ-, λ+]`.
pub fn mp_density<T: Real>(lambda: T, p: &MpParams<T>) -> T {
    if lambda <= T::zero() || lambda < p.lambda_minus || lambda > p.lambda_plus {
        return T::zero();
    }
    let two_pi = T::lit(2.0 * std::f64::consts::PI);
    let s = ((p.lambda_plus - lambda) * (lambda - p.lambda_minus)).max(T::zero()).sqrt();
    p.q / (two_pi * p.sigma2) * s / lambda
}

/// `1 - λ_market / N`: variance left outside the top mode.
pub fn rescaled_sigma2<T: Real>(lambda_market: T, n_stocks: usize) -> Result<T> {
    let n = T::from_usize_lossy(n_stocks);
    if n_stocks == 0 || lambda_market < T::zero() || lambda_market > n {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= lambda_market <= N (lambda_market = {lambda_market}, N = {n_stocks})"
        )));
    }
    Ok(T::one() - lambda_market / n)
}

/// Tickers ranked by `value` descending, ties by ticker ascending; the first
/// `k` are returned.
fn top_k<T: Real>(stats: &BTreeMap<String, NodeStats<T>>, k: usize, value: impl Fn(&NodeStats<T>) -> T) -> BTreeSet<String> {
    let mut ranked: Vec<(&String, T)> = stats.iter().map(|(t, s)| (t, value(s))).collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(b.0))
    });
    ranked.into_iter().take(k).map(|(t, _)| t.clone()).collect()
}

/// Size of the top-fraction cut: `ceil(fraction · n)`, at least 1.
pub fn top_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64 - 1e-9).ceil().max(1.0) as usize).min(n)
}

/// Tickers in both the eigencentrality and the PageRank top
/// `ceil(top_fraction · n_nodes)`, sorted.
pub fn influential_tickers<T: Real>(
    stats: &BTreeMap<String, NodeStats<T>>,
    top_fraction: f64,
) -> Result<Vec<String>> {
    if stats.is_empty() {
        return Err(Error::NoInfluentialStocks);
    }
    let k = top_count(top_fraction, stats.len());
    let by_centrality = top_k(stats, k, |s| s.eigencentrality);
    let by_pagerank = top_k(stats, k, |s| s.pagerank);
    let selected: Vec<String> = by_centrality.intersection(&by_pagerank).cloned().collect();
    if selected.is_empty() {
        return Err(Error::NoInfluentialStocks);
    }
    Ok(selected)
}

/// Picks the market modes: the number of stocks ranked in the top
/// `top_fraction` by both eigenvector centrality and PageRank sets how many of
/// the largest eigenvalues are market modes. The smallest selected eigenvalue
/// must clear the unrescaled MP upper edge.
pub fn select_market_modes<T: Real>(
    split: &SpectralSplit<T>,
    stats: &BTreeMap<String, NodeStats<T>>,
    mp: &MpParams<T>,
    top_fraction: f64,
) -> Result<SpectralSplit<T>> {
    let selected = influential_tickers(stats, top_fraction)?;
    let n_market = selected.len().min(split.n());
    let smallest = split.eigenvalues[n_market - 1];
    if smallest < mp.lambda_plus {
        return Err(Error::EigenvalueBelowEdge {
            selected: smallest.as_f64(),
            edge: mp.lambda_plus.as_f64(),
        });
    }
    let mut out = split.clone();
    out.market_indices = (0..n_market).collect();
    out.market_tickers = selected;
    Ok(out)
}

/// `Q Λ_S Qᵀ` keeping only the eigenvalues in `indices`.
pub fn mode_projection<T: Real>(split: &SpectralSplit<T>, indices: &[usize]) -> Result<Matrix<T>> {
    let n = split.n();
    if let Some(&bad) = indices.iter().find(|&&k| k >= n) {
        return Err(Error::InvalidArgument(format!(
            "mode index {bad} out of range 0..{n}"
        )));
    }
    let q = &split.eigenvectors;
    let mut m = Matrix::zeros(n, n);
    // Scaled eigenvector rows: a[i][s] = q[i][k_s] * λ_{k_s}.
    let cols: Vec<(T, Vec<T>)> = indices
        .iter()
        .map(|&k| (split.eigenvalues[k], q.column(k)))
        .collect();
    for i in 0..n {
        for j in i..n {
            let v: T = cols.iter().map(|(l, c)| *l * c[i] * c[j]).sum();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Market projection and its noise complement.
pub fn market_noise_projections<T: Real>(split: &SpectralSplit<T>) -> Result<(Matrix<T>, Matrix<T>)> {
    Ok((
        mode_projection(split, &split.market_indices)?,
        mode_projection(split, &split.noise_indices())?,
    ))
}

/// `M_ij / √(M_ii M_jj)`; rows with `M_ii <= 1e-12` are flagged undefined
/// and hold NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct RescaledCorrelation<T> {
    pub values: Matrix<T>,
    pub defined: Vec<bool>,
}

impl<T: Real> RescaledCorrelation<T> {
    /// Upper off-diagonal entries between defined rows.
    pub fn off_diagonal(&self) -> Vec<T> {
        let n = self.defined.len();
        let mut out = Vec::new();
        for i in 0..n {
            if !self.defined[i] {
                continue;
            }
            for j in (i + 1)..n {
                if self.defined[j] {
                    out.push(self.values[(i, j)]);
                }
            }
        }
        out
    }
}

pub fn rescale_correlation<T: Real>(m: &Matrix<T>) -> RescaledCorrelation<T> {
    let n = m.nrows();
    let eps = T::lit(UNDEFINED_DIAGONAL);
    let defined: Vec<bool> = (0..n).map(|i| m[(i, i)] > eps).collect();
    let values = Matrix::from_fn(n, n, |i, j| {
        if !(defined[i] && defined[j]) {
            T::nan()
        } else if i == j {
            T::one()
        } else {
            m[(i, j)] / (m[(i, i)] * m[(j, j)]).sqrt()
        }
    });
    RescaledCorrelation { values, defined }
}

/// Eigenvalue histogram with MP overlays (`mp` unrescaled, `mp_rescaled`
/// with σ² = 1 - λ_max / N) sampled at the bin centres.
pub fn eigenvalue_histogram<T: Real>(
    split: &SpectralSplit<T>,
    bins: usize,
    range: Option<(T, T)>,
    overlays: &[(&str, MpParams<T>)],
) -> Result<Histogram<T>> {
    let mut h = Histogram::new(&split.eigenvalues, bins, range)?;
    for (name, p) in overlays {
        let p = *p;
        h = h.with_overlay(*name, move |x| mp_density(x, &p));
    }
    Ok(h)
}

/// Square matrix with ticker labels: header `ticker,<tickers...>`, one row
/// per ticker.
pub fn write_labeled_matrix<T: Real, W: Write>(tickers: &[String], m: &Matrix<T>, writer: W) -> Result<()> {
    if m.nrows() != tickers.len() || m.ncols() != tickers.len() {
        return Err(Error::Dimension(format!(
            "{} labels for a {}x{} matrix",
            tickers.len(),
            m.nrows(),
            m.ncols()
        )));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["ticker".to_string()];
    header.extend(tickers.iter().cloned());
    w.write_record(&header)?;
    for (i, t) in tickers.iter().enumerate() {
        let mut rec = vec![t.clone()];
        rec.extend(m.row(i).iter().map(|v| format!("{v:e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labeled_matrix<T: Real, R: std::io::Read>(reader: R) -> Result<(Vec<String>, Matrix<T>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let tickers: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_string).collect();
    let n = tickers.len();
    let mut data = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != n + 1 {
            return Err(Error::Format {
                row: k + 2,
                column: rec.len(),
                message: format!("expected {} fields", n + 1),
            });
        }
        for (j, field) in rec.iter().skip(1).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Format {
                row: k + 2,
                column: j + 2,
                message: format!("invalid number `{field}`"),
            })?;
            data.push(T::lit(v));
        }
        rows += 1;
    }
    Ok((tickers, Matrix::from_vec(rows, n, data)?))
}
