//! Price panels: CSV ingestion, universe cleaning, log-returns and per-stock
//! GBM parameter estimates.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{mean, sample_std, Real};

pub const UNKNOWN_SECTOR: &str = "UNKNOWN";

/// Date-aligned closing prices, one column per ticker. Missing observations in
/// a freshly loaded panel are `NaN`; [`clean_universe`] removes them.
#[derive(Clone, Debug, PartialEq)]
pub struct PricePanel<T> {
    tickers: Vec<String>,
    dates: Vec<NaiveDate>,
    prices: Matrix<T>,
    sectors: BTreeMap<String, String>,
}

impl<T: Real> PricePanel<T> {
    /// Validates shape, date ordering and positivity (NaN counts as missing).
    pub fn new(tickers: Vec<String>, dates: Vec<NaiveDate>, prices: Matrix<T>) -> Result<Self> {
        if prices.nrows() != dates.len() || prices.ncols() != tickers.len() {
            return Err(Error::Dimension(format!(
                "price matrix is {}x{} but there are {} dates and {} tickers",
                prices.nrows(),
                prices.ncols(),
                dates.len(),
                tickers.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Data {
                ticker: "date".into(),
                date: w[1].to_string(),
                message: format!("dates must be strictly increasing (follows {})", w[0]),
            });
        }
        for (t, date) in dates.iter().enumerate() {
            for (i, ticker) in tickers.iter().enumerate() {
                let p = prices[(t, i)];
                if !p.is_nan() && !(p > T::zero() && p.is_finite()) {
                    return Err(Error::Data {
                        ticker: ticker.clone(),
                        date: date.to_string(),
                        message: format!("price must be strictly positive, got {p}"),
                    });
                }
            }
        }
        Ok(Self {
            tickers,
            dates,
            prices,
            sectors: BTreeMap::new(),
        })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &Matrix<T> {
        &self.prices
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_tickers(&self) -> usize {
        self.tickers.len()
    }

    pub fn series(&self, ticker_index: usize) -> Vec<T> {
        self.prices.column(ticker_index)
    }

    pub fn is_complete(&self) -> bool {
        self.prices.as_slice().iter().all(|p| !p.is_nan())
    }

    pub fn sectors(&self) -> &BTreeMap<String, String> {
        &self.sectors
    }

    /// Sector of a ticker, `UNKNOWN` when none was supplied.
    pub fn sector(&self, ticker: &str) -> &str {
        self.sectors.get(ticker).map_or(UNKNOWN_SECTOR, String::as_str)
    }

    pub fn with_sectors(mut self, sectors: BTreeMap<String, String>) -> Self {
        self.sectors = sectors;
        self
    }

    /// Rows `range` of the panel (dates are a contiguous slice).
    pub fn slice_dates(&self, range: Range<usize>) -> Self {
        let rows = range.len();
        let start = range.start;
        Self {
            tickers: self.tickers.clone(),
            dates: self.dates[range].to_vec(),
            prices: Matrix::from_fn(rows, self.n_tickers(), |t, i| self.prices[(start + t, i)]),
            sectors: self.sectors.clone(),
        }
    }

    fn select_tickers(&self, keep: &[usize]) -> Self {
        Self {
            tickers: keep.iter().map(|&i| self.tickers[i].clone()).collect(),
            dates: self.dates.clone(),
            prices: Matrix::from_fn(self.n_dates(), keep.len(), |t, k| self.prices[(t, keep[k])]),
            sectors: self.sectors.clone(),
        }
    }
}

/// Pluggable downloader: returns panel-CSV bytes for a universe and date range.
pub trait PriceSource {
    fn fetch(&self, universe: &[String], start: NaiveDate, end: NaiveDate) -> Result<Vec<u8>>;
}

impl<F> PriceSource for F
where
    F: Fn(&[String], NaiveDate, NaiveDate) -> Result<Vec<u8>>,
{
    fn fetch(&self, universe: &[String], start: NaiveDate, end: NaiveDate) -> Result<Vec<u8>> {
        self(universe, start, end)
    }
}

pub fn load_from_source<T: Real>(
    source: &dyn PriceSource,
    universe: &[String],
    start: NaiveDate,
    end: NaiveDate,
) -> Result<PricePanel<T>> {
    let bytes = source.fetch(universe, start, end)?;
    parse_price_panel(bytes.as_slice())
}

pub fn load_price_panel<T: Real>(path: impl AsRef<Path>) -> Result<PricePanel<T>> {
    parse_price_panel(std::fs::File::open(path)?)
}

/// Loads a panel and attaches sectors from a `ticker,sector` CSV.
pub fn load_price_panel_with_sectors<T: Real>(
    prices: impl AsRef<Path>,
    sectors: impl AsRef<Path>,
) -> Result<PricePanel<T>> {
    let panel = load_price_panel(prices)?;
    let sectors = parse_sectors(std::fs::File::open(sectors)?)?;
    Ok(panel.with_sectors(sectors))
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell.trim().to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "null" | "none"
    )
}

/// Parses the panel-CSV layout: header `date,<ticker>...`, one row per date.
pub fn parse_price_panel<T: Real, R: Read>(reader: R) -> Result<PricePanel<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() || header.get(0).map(str::trim) != Some("date") {
        return Err(Error::Format {
            row: 1,
            column: 1,
            message: "first header column must be `date`".into(),
        });
    }
    let tickers: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let n = tickers.len();
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 2;
        let rec = rec?;
        if rec.len() != n + 1 {
            return Err(Error::Format {
                row,
                column: rec.len().min(n + 1),
                message: format!("expected {} fields, found {}", n + 1, rec.len()),
            });
        }
        let date_cell = rec[0].trim();
        let date = NaiveDate::parse_from_str(date_cell, "%Y-%m-%d").map_err(|e| Error::Format {
            row,
            column: 1,
            message: format!("invalid date `{date_cell}`: {e}"),
        })?;
        for (i, cell) in rec.iter().skip(1).enumerate() {
            let v = if is_missing(cell) {
                T::nan()
            } else {
                let x: f64 = cell.trim().parse().map_err(|_| Error::Format {
                    row,
                    column: i + 2,
                    message: format!("invalid price `{}`", cell.trim()),
                })?;
                if !(x > 0.0) || !x.is_finite() {
                    return Err(Error::Data {
                        ticker: tickers[i].clone(),
                        date: date.to_string(),
                        message: format!("price must be strictly positive, got {x}"),
                    });
                }
                T::lit(x)
            };
            values.push(v);
        }
        dates.push(date);
    }
    let prices = Matrix::from_vec(dates.len(), n, values)?;
    PricePanel::new(tickers, dates, prices)
}

/// Parses a `ticker,sector` CSV.
pub fn parse_sectors<R: Read>(reader: R) -> Result<BTreeMap<String, String>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols != ["ticker", "sector"] {
        return Err(Error::Format {
            row: 1,
            column: 1,
            message: "sector CSV header must be `ticker,sector`".into(),
        });
    }
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.insert(rec[0].trim().to_string(), rec[1].trim().to_string());
    }
    Ok(out)
}

/// Writes the panel in panel-CSV layout (missing values as empty cells).
pub fn write_price_panel<T: Real, W: Write>(panel: &PricePanel<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(panel.tickers.iter().cloned());
    w.write_record(&header)?;
    for (t, date) in panel.dates.iter().enumerate() {
        let mut rec = vec![date.format("%Y-%m-%d").to_string()];
        rec.extend(panel.prices.row(t).iter().map(|p| {
            if p.is_nan() {
                String::new()
            } else {
                format!("{p:e}")
            }
        }));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Drops every ticker with a missing price anywhere in the date range.
pub fn clean_universe<T: Real>(panel: &PricePanel<T>) -> Result<PricePanel<T>> {
    let keep: Vec<usize> = (0..panel.n_tickers())
        .filter(|&i| (0..panel.n_dates()).all(|t| !panel.prices[(t, i)].is_nan()))
        .collect();
    if keep.is_empty() {
        return Err(Error::NoCompleteTickers);
    }
    Ok(panel.select_tickers(&keep))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReturnPanel<T> {
    pub tickers: Vec<String>,
    /// Date at the end of each return interval.
    pub dates: Vec<NaiveDate>,
    /// (T_days - 1) x N log-returns.
    pub returns: Matrix<T>,
}

impl<T: Real> ReturnPanel<T> {
    pub fn n_obs(&self) -> usize {
        self.returns.nrows()
    }

    pub fn n_tickers(&self) -> usize {
        self.returns.ncols()
    }

    /// Rebuilds prices by cumulative exponentiation from `s0`.
    pub fn reconstruct_prices(&self, s0: &[T]) -> Matrix<T> {
        let n = self.n_tickers();
        assert_eq!(s0.len(), n);
        let mut out = Matrix::zeros(self.n_obs() + 1, n);
        out.row_mut(0).copy_from_slice(s0);
        let mut acc = vec![T::zero(); n];
        for t in 0..self.n_obs() {
            for i in 0..n {
                acc[i] = acc[i] + self.returns[(t, i)];
                out[(t + 1, i)] = s0[i] * acc[i].exp();
            }
        }
        out
    }
}

pub fn log_returns<T: Real>(panel: &PricePanel<T>) -> Result<ReturnPanel<T>> {
    if panel.n_dates() < 2 {
        return Err(Error::InsufficientData(format!(
            "log-returns need at least 2 dates, panel has {}",
            panel.n_dates()
        )));
    }
    let p = &panel.prices;
    let returns = Matrix::from_fn(panel.n_dates() - 1, panel.n_tickers(), |t, i| {
        p[(t + 1, i)].ln() - p[(t, i)].ln()
    });
    Ok(ReturnPanel {
        tickers: panel.tickers.clone(),
        dates: panel.dates[1..].to_vec(),
        returns,
    })
}

/// GBM parameters per trading day.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbmParams<T> {
    pub s0: T,
    pub mu: T,
    pub sigma: T,
}

impl<T: Real> GbmParams<T> {
    pub fn new(s0: T, mu: T, sigma: T) -> Result<Self> {
        if !(s0 > T::zero()) || sigma < T::zero() || !mu.is_finite() || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "GBM parameters need s0 > 0 and sigma >= 0 (s0 = {s0}, mu = {mu}, sigma = {sigma})"
            )));
        }
        Ok(Self { s0, mu, sigma })
    }
}

/// Estimates GBM parameters from `prices[window]` with dt = 1 day.
///
/// `s0` is the last price in the window, `sigma` the sample standard deviation
/// of daily log-returns and `mu = mean + sigma² / 2`, so the simulated log-drift
/// `mu - sigma² / 2` reproduces the observed mean log-return.
pub fn estimate_gbm_params<T: Real>(prices: &[T], window: Range<usize>) -> Result<GbmParams<T>> {
    if window.end > prices.len() || window.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "GBM estimation needs at least 2 prices in window {window:?} (series length {})",
            prices.len()
        )));
    }
    let w = &prices[window];
    let rets: Vec<T> = w.windows(2).map(|p| p[1].ln() - p[0].ln()).collect();
    let sigma = sample_std(&rets);
    let mu = mean(&rets) + sigma * sigma / T::lit(2.0);
    GbmParams::new(*w.last().expect("non-empty window"), mu, sigma)
}

/// Estimates parameters for every column of a panel over the whole date range.
pub fn estimate_panel_params<T: Real>(panel: &PricePanel<T>) -> Result<Vec<GbmParams<T>>> {
    (0..panel.n_tickers())
        .map(|i| estimate_gbm_params(&panel.series(i), 0..panel.n_dates()))
        .collect()
}
