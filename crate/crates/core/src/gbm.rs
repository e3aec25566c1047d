//! Correlated geometric-Brownian-motion ensembles.
//!
//! Each walk mixes its own Gaussian stream with a shared "channel" stream,
//! `ε_k = (1 - c_eff) ε¹_k + c_eff ε²_k`. Community channels share a stream
//! per Louvain community and couple with the stock's clustering coefficient;
//! the market channel shares one stream across all stocks and couples with
//! the stock's strongest correlation to a market stock. Channel walks are
//! blended pointwise with [`BlendWeights`].

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Datelike, NaiveDate, Weekday};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corrnet::{pearson, CorrMatrix, NodeStats};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::market_data::{GbmParams, PricePanel};
use crate::rng::{derive_key, hash_str, CounterRng};
use crate::scalar::Real;

/// Shared-stream seed of the market channel.
pub const MARKET_CHANNEL_SEED: u64 = 4376;
/// Community channel seeds are `label + COMMUNITY_SEED_OFFSET`.
pub const COMMUNITY_SEED_OFFSET: u64 = 1_000_000;

const NS_OWN: u64 = 0x4F57_4E00;
const NS_SHARED: u64 = 0x5348_5244;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    /// Louvain-community correlated walks (S^L).
    Community,
    /// Market-mode correlated walks (S^M).
    Market,
    /// Independent walks (S^N).
    Noise,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Community, Channel::Market, Channel::Noise];

    fn tag(self) -> u64 {
        match self {
            Self::Community => 1,
            Self::Market => 2,
            Self::Noise => 3,
        }
    }
}

/// Coupling strength and shared-stream seed of one walk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrChannelConfig<T> {
    pub c_eff: T,
    pub seed: u64,
}

impl<T: Real> CorrChannelConfig<T> {
    pub fn new(c_eff: T, seed: u64) -> Result<Self> {
        if !(c_eff.abs() <= T::one()) {
            return Err(Error::InvalidArgument(format!(
                "c_eff must lie in [-1, 1], got {c_eff}"
            )));
        }
        Ok(Self { c_eff, seed })
    }

    pub fn independent() -> Self {
        Self {
            c_eff: T::zero(),
            seed: 0,
        }
    }
}

/// How the own and shared streams are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMix {
    /// `(1 - c) ε¹ + c ε²`, variance `(1 - c)² + c²`.
    #[default]
    Verbatim,
    /// Same mix divided by `√((1 - c)² + c²)` to keep unit variance.
    Renormalized,
}

/// Per-walk seed for the own stream, derived from the master seed, the
/// channel and the ticker.
pub fn own_seed(master_seed: u64, channel: Channel, ticker: &str) -> u64 {
    derive_key(&[NS_OWN, master_seed, channel.tag(), hash_str(ticker)])
}

fn shared_stream(master_seed: u64, channel_seed: u64) -> CounterRng {
    CounterRng::new(derive_key(&[NS_SHARED, master_seed, channel_seed]))
}

/// One correlated GBM price path of `t_steps` points with dt = 1:
/// `S_k = s0 exp((μ - σ²/2) k + σ W_k)`, `W_k = Σ_{i=1..k} ε_i`, `S_0 = s0`.
/// The own stream is keyed by `own_seed`; the shared stream by
/// `(master_seed, channel.seed)`, both indexed by the time step.
pub fn simulate_gbm_corr<T: Real>(
    params: &GbmParams<T>,
    t_steps: usize,
    channel: &CorrChannelConfig<T>,
    own_seed: u64,
    master_seed: u64,
) -> Vec<T> {
    simulate_gbm_corr_with(params, t_steps, channel, own_seed, master_seed, NoiseMix::Verbatim)
}

pub fn simulate_gbm_corr_with<T: Real>(
    params: &GbmParams<T>,
    t_steps: usize,
    channel: &CorrChannelConfig<T>,
    own_seed: u64,
    master_seed: u64,
    mix: NoiseMix,
) -> Vec<T> {
    let own = CounterRng::new(derive_key(&[NS_OWN, own_seed]));
    let shared = shared_stream(master_seed, channel.seed);
    let c = channel.c_eff;
    let one_minus = T::one() - c;
    let norm = match mix {
        NoiseMix::Verbatim => T::one(),
        NoiseMix::Renormalized => (one_minus * one_minus + c * c).sqrt(),
    };
    let drift = params.mu - params.sigma * params.sigma / T::lit(2.0);
    let mut path = Vec::with_capacity(t_steps);
    let mut w = T::zero();
    for k in 0..t_steps {
        if k > 0 {
            let e1 = T::lit(own.normal(k as u64));
            let eps = if c == T::zero() {
                e1
            } else {
                (e1 * one_minus + c * T::lit(shared.normal(k as u64))) / norm
            };
            w = w + eps;
        }
        let x = drift * T::from_usize_lossy(k) + params.sigma * w;
        path.push(params.s0 * x.exp());
    }
    path
}

/// Channel assignment plus the simulated paths (`t_steps × N`) of one channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelPaths<T> {
    pub channel: Channel,
    pub configs: Vec<CorrChannelConfig<T>>,
    pub paths: Matrix<T>,
}

fn simulate_channel<T: Real>(
    channel: Channel,
    tickers: &[String],
    params: &[GbmParams<T>],
    configs: Vec<CorrChannelConfig<T>>,
    t_steps: usize,
    master_seed: u64,
    mix: NoiseMix,
) -> Result<ChannelPaths<T>> {
    if params.len() != tickers.len() || configs.len() != tickers.len() {
        return Err(Error::Dimension(format!(
            "{} tickers, {} parameter sets, {} channel configs",
            tickers.len(),
            params.len(),
            configs.len()
        )));
    }
    if t_steps == 0 {
        return Err(Error::InvalidArgument("t_steps must be at least 1".into()));
    }
    let columns: Vec<Vec<T>> = (0..tickers.len())
        .into_par_iter()
        .map(|i| {
            let seed = own_seed(master_seed, channel, &tickers[i]);
            simulate_gbm_corr_with(&params[i], t_steps, &configs[i], seed, master_seed, mix)
        })
        .collect();
    let paths = Matrix::from_fn(t_steps, tickers.len(), |t, i| columns[i][t]);
    Ok(ChannelPaths {
        channel,
        configs,
        paths,
    })
}

/// Community channel configs: seed from the community label, coupling from
/// the clustering coefficient.
pub fn community_configs<T: Real>(
    tickers: &[String],
    communities: &BTreeMap<String, usize>,
    clustering: &BTreeMap<String, T>,
) -> Result<Vec<CorrChannelConfig<T>>> {
    tickers
        .iter()
        .map(|t| {
            let label = communities.get(t).ok_or_else(|| Error::MissingLabel(t.clone()))?;
            let c = clustering.get(t).ok_or_else(|| Error::MissingLabel(t.clone()))?;
            CorrChannelConfig::new(*c, *label as u64 + COMMUNITY_SEED_OFFSET)
        })
        .collect()
}

/// Community walks S^L.
pub fn community_walks<T: Real>(
    tickers: &[String],
    params: &[GbmParams<T>],
    communities: &BTreeMap<String, usize>,
    clustering: &BTreeMap<String, T>,
    t_steps: usize,
    master_seed: u64,
) -> Result<ChannelPaths<T>> {
    let configs = community_configs(tickers, communities, clustering)?;
    simulate_channel(Channel::Community, tickers, params, configs, t_steps, master_seed, NoiseMix::Verbatim)
}

/// Community labels and clustering for a whole universe. Tickers absent from
/// the graph become singleton communities with zero clustering.
pub fn universe_labels<T: Real>(
    tickers: &[String],
    stats: &BTreeMap<String, NodeStats<T>>,
) -> (BTreeMap<String, usize>, BTreeMap<String, T>) {
    let mut next = stats.values().map(|s| s.community + 1).max().unwrap_or(0);
    let mut communities = BTreeMap::new();
    let mut clustering = BTreeMap::new();
    for t in tickers {
        match stats.get(t) {
            Some(s) => {
                communities.insert(t.clone(), s.community);
                clustering.insert(t.clone(), s.clustering);
            }
            None => {
                communities.insert(t.clone(), next);
                clustering.insert(t.clone(), T::zero());
                next += 1;
            }
        }
    }
    (communities, clustering)
}

/// Market channel configs: each stock couples to the market stock with the
/// largest `|C|` (ties to the lexicographically first ticker), keeping the
/// sign; market stocks couple to themselves.
pub fn market_configs<T: Real>(
    tickers: &[String],
    corr: &CorrMatrix<T>,
    market_tickers: &[String],
) -> Result<Vec<CorrChannelConfig<T>>> {
    if market_tickers.is_empty() {
        return Err(Error::InvalidArgument("market ticker list is empty".into()));
    }
    let mut market: Vec<(&String, usize)> = market_tickers
        .iter()
        .map(|t| {
            corr.index_of(t)
                .map(|j| (t, j))
                .ok_or_else(|| Error::MissingNode(t.clone()))
        })
        .collect::<Result<_>>()?;
    market.sort();
    tickers
        .iter()
        .map(|t| {
            let i = corr.index_of(t).ok_or_else(|| Error::MissingNode(t.clone()))?;
            if market.iter().any(|(m, _)| *m == t) {
                return CorrChannelConfig::new(T::one(), MARKET_CHANNEL_SEED);
            }
            let mut best = market[0].1;
            for &(_, j) in &market[1..] {
                if corr.get(i, j).abs() > corr.get(i, best).abs() {
                    best = j;
                }
            }
            CorrChannelConfig::new(corr.get(i, best), MARKET_CHANNEL_SEED)
        })
        .collect()
}

/// Market walks S^M.
pub fn market_walks<T: Real>(
    tickers: &[String],
    params: &[GbmParams<T>],
    corr: &CorrMatrix<T>,
    market_tickers: &[String],
    t_steps: usize,
    master_seed: u64,
) -> Result<ChannelPaths<T>> {
    let configs = market_configs(tickers, corr, market_tickers)?;
    simulate_channel(Channel::Market, tickers, params, configs, t_steps, master_seed, NoiseMix::Verbatim)
}

/// Independent walks S^N.
pub fn noise_walks<T: Real>(
    tickers: &[String],
    params: &[GbmParams<T>],
    t_steps: usize,
    master_seed: u64,
) -> Result<ChannelPaths<T>> {
    let configs = vec![CorrChannelConfig::independent(); tickers.len()];
    simulate_channel(Channel::Noise, tickers, params, configs, t_steps, master_seed, NoiseMix::Verbatim)
}

/// Pointwise weighted average of price paths, weights normalised to sum 1.
pub fn blend_walks<T: Real>(components: &[(T, &[T])]) -> Result<Vec<T>> {
    let total = check_weights(components.iter().map(|c| c.0))?;
    let len = components[0].1.len();
    if let Some((_, p)) = components.iter().find(|(_, p)| p.len() != len) {
        return Err(Error::LengthMismatch {
            expected: len,
            found: p.len(),
        });
    }
    Ok((0..len)
        .map(|t| {
            components
                .iter()
                .map(|&(w, p)| (w / total) * p[t])
                .sum()
        })
        .collect())
}

fn check_weights<T: Real>(weights: impl Iterator<Item = T>) -> Result<T> {
    let mut total = T::zero();
    let mut any = false;
    for w in weights {
        any = true;
        if !(w >= T::zero()) || !w.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "blend weights must be non-negative, got {w}"
            )));
        }
        total = total + w;
    }
    if !any || total <= T::zero() {
        return Err(Error::InvalidArgument("blend weights are all zero".into()));
    }
    Ok(total)
}

/// Matrix form of [`blend_walks`], column by column.
pub fn blend_path_matrices<T: Real>(components: &[(T, &Matrix<T>)]) -> Result<Matrix<T>> {
    let total = check_weights(components.iter().map(|c| c.0))?;
    let (rows, cols) = (components[0].1.nrows(), components[0].1.ncols());
    for (_, m) in components {
        if m.nrows() != rows || m.ncols() != cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                found: m.nrows() * m.ncols(),
            });
        }
    }
    let active: Vec<(T, &Matrix<T>)> = components
        .iter()
        .filter(|(w, _)| *w > T::zero())
        .map(|&(w, m)| (w / total, m))
        .collect();
    Ok(Matrix::from_fn(rows, cols, |t, i| {
        active.iter().map(|&(w, m)| w * m[(t, i)]).sum()
    }))
}

/// Convex blend weights over the three channels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlendWeights<T> {
    pub community: T,
    pub market: T,
    pub noise: T,
}

impl<T: Real> BlendWeights<T> {
    /// Normalises the raw weights to sum 1.
    pub fn new(community: T, market: T, noise: T) -> Result<Self> {
        let total = check_weights([community, market, noise].into_iter())?;
        Ok(Self {
            community: community / total,
            market: market / total,
            noise: noise / total,
        })
    }

    pub fn get(&self, channel: Channel) -> T {
        match channel {
            Channel::Community => self.community,
            Channel::Market => self.market,
            Channel::Noise => self.noise,
        }
    }

    /// Weights for `active` channels from a vector in the same order; the
    /// other channels get zero.
    pub fn from_active(active: &[Channel], values: &[T]) -> Result<Self> {
        if active.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} channels but {} weights",
                active.len(),
                values.len()
            )));
        }
        let pick = |c: Channel| {
            active
                .iter()
                .position(|&a| a == c)
                .map_or(T::zero(), |k| values[k])
        };
        Self::new(pick(Channel::Community), pick(Channel::Market), pick(Channel::Noise))
    }

    pub fn to_vec(&self) -> Vec<T> {
        vec![self.community, self.market, self.noise]
    }
}

/// Everything needed to regenerate an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub master_seed: u64,
    pub t_steps: usize,
    pub weights: BlendWeights<f64>,
    pub channels: Vec<StockChannels>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StockChannels {
    pub ticker: String,
    pub params: GbmParams<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub community: Option<CorrChannelConfig<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub market: Option<CorrChannelConfig<f64>>,
}

/// Blended simulated prices for a stock universe.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkEnsemble<T> {
    pub tickers: Vec<String>,
    /// `t_steps × N` prices.
    pub paths: Matrix<T>,
    pub params: Vec<GbmParams<T>>,
    pub community: Option<Vec<CorrChannelConfig<T>>>,
    pub market: Option<Vec<CorrChannelConfig<T>>>,
    pub weights: BlendWeights<T>,
    pub master_seed: u64,
}

impl<T: Real> WalkEnsemble<T> {
    pub fn t_steps(&self) -> usize {
        self.paths.nrows()
    }

    pub fn config(&self) -> EnsembleConfig {
        let conv = |c: &CorrChannelConfig<T>| CorrChannelConfig {
            c_eff: c.c_eff.as_f64(),
            seed: c.seed,
        };
        EnsembleConfig {
            master_seed: self.master_seed,
            t_steps: self.t_steps(),
            weights: BlendWeights {
                community: self.weights.community.as_f64(),
                market: self.weights.market.as_f64(),
                noise: self.weights.noise.as_f64(),
            },
            channels: self
                .tickers
                .iter()
                .enumerate()
                .map(|(i, t)| StockChannels {
                    ticker: t.clone(),
                    params: GbmParams {
                        s0: self.params[i].s0.as_f64(),
                        mu: self.params[i].mu.as_f64(),
                        sigma: self.params[i].sigma.as_f64(),
                    },
                    community: self.community.as_ref().map(|c| conv(&c[i])),
                    market: self.market.as_ref().map(|c| conv(&c[i])),
                })
                .collect(),
        }
    }

    /// Rebuilds an ensemble from its configuration.
    pub fn from_config(config: &EnsembleConfig) -> Result<Self> {
        let tickers: Vec<String> = config.channels.iter().map(|c| c.ticker.clone()).collect();
        let params: Vec<GbmParams<T>> = config
            .channels
            .iter()
            .map(|c| GbmParams::new(T::lit(c.params.s0), T::lit(c.params.mu), T::lit(c.params.sigma)))
            .collect::<Result<_>>()?;
        let collect = |get: fn(&StockChannels) -> Option<CorrChannelConfig<f64>>| -> Result<Option<Vec<CorrChannelConfig<T>>>> {
            let v: Option<Vec<_>> = config.channels.iter().map(get).collect();
            v.map(|v| v.into_iter().map(|c| CorrChannelConfig::new(T::lit(c.c_eff), c.seed)).collect())
                .transpose()
        };
        let builder = EnsembleBuilder {
            tickers,
            params,
            t_steps: config.t_steps,
            community: collect(|c| c.community)?,
            market: collect(|c| c.market)?,
        };
        let w = &config.weights;
        builder
            .components(config.master_seed)?
            .blend(&BlendWeights::new(T::lit(w.community), T::lit(w.market), T::lit(w.noise))?)
    }

    pub fn write_config_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, &self.config())?;
        Ok(())
    }

    /// Simulated prices as a panel; without `dates`, consecutive weekdays
    /// from 2000-01-03 are used.
    pub fn to_price_panel(&self, dates: Option<&[NaiveDate]>) -> Result<PricePanel<T>> {
        let dates = match dates {
            Some(d) => d.to_vec(),
            None => business_days(NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date"), self.t_steps()),
        };
        PricePanel::new(self.tickers.clone(), dates, self.paths.clone())
    }
}

fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

/// Channel assignments for a universe; generates channel paths per master seed.
#[derive(Clone, Debug)]
pub struct EnsembleBuilder<T> {
    pub tickers: Vec<String>,
    pub params: Vec<GbmParams<T>>,
    pub t_steps: usize,
    pub community: Option<Vec<CorrChannelConfig<T>>>,
    pub market: Option<Vec<CorrChannelConfig<T>>>,
}

impl<T: Real> EnsembleBuilder<T> {
    pub fn new(tickers: Vec<String>, params: Vec<GbmParams<T>>, t_steps: usize) -> Result<Self> {
        if tickers.len() != params.len() {
            return Err(Error::Dimension(format!(
                "{} tickers but {} parameter sets",
                tickers.len(),
                params.len()
            )));
        }
        Ok(Self {
            tickers,
            params,
            t_steps,
            community: None,
            market: None,
        })
    }

    pub fn with_communities(
        mut self,
        communities: &BTreeMap<String, usize>,
        clustering: &BTreeMap<String, T>,
    ) -> Result<Self> {
        self.community = Some(community_configs(&self.tickers, communities, clustering)?);
        Ok(self)
    }

    pub fn with_market(mut self, corr: &CorrMatrix<T>, market_tickers: &[String]) -> Result<Self> {
        self.market = Some(market_configs(&self.tickers, corr, market_tickers)?);
        Ok(self)
    }

    /// Simulates every configured channel (noise always) for `master_seed`.
    pub fn components(&self, master_seed: u64) -> Result<EnsembleComponents<T>> {
        let sim = |channel, configs: Vec<CorrChannelConfig<T>>| {
            simulate_channel(channel, &self.tickers, &self.params, configs, self.t_steps, master_seed, NoiseMix::Verbatim)
        };
        Ok(EnsembleComponents {
            tickers: self.tickers.clone(),
            params: self.params.clone(),
            master_seed,
            community: self.community.clone().map(|c| sim(Channel::Community, c)).transpose()?,
            market: self.market.clone().map(|c| sim(Channel::Market, c)).transpose()?,
            noise: sim(Channel::Noise, vec![CorrChannelConfig::independent(); self.tickers.len()])?,
        })
    }
}

/// Channel paths for one master seed, ready to blend at any weights.
#[derive(Clone, Debug)]
pub struct EnsembleComponents<T> {
    pub tickers: Vec<String>,
    pub params: Vec<GbmParams<T>>,
    pub master_seed: u64,
    pub community: Option<ChannelPaths<T>>,
    pub market: Option<ChannelPaths<T>>,
    pub noise: ChannelPaths<T>,
}

impl<T: Real> EnsembleComponents<T> {
    fn channel(&self, c: Channel) -> Option<&ChannelPaths<T>> {
        match c {
            Channel::Community => self.community.as_ref(),
            Channel::Market => self.market.as_ref(),
            Channel::Noise => Some(&self.noise),
        }
    }

    pub fn blend(&self, weights: &BlendWeights<T>) -> Result<WalkEnsemble<T>> {
        let mut parts = Vec::new();
        for c in Channel::ALL {
            let w = weights.get(c);
            if w > T::zero() {
                let paths = self.channel(c).ok_or_else(|| {
                    Error::Config(format!("channel {c:?} has weight {w} but no assignment"))
                })?;
                parts.push((w, &paths.paths));
            }
        }
        let paths = blend_path_matrices(&parts)?;
        Ok(WalkEnsemble {
            tickers: self.tickers.clone(),
            paths,
            params: self.params.clone(),
            community: self.community.as_ref().map(|c| c.configs.clone()),
            market: self.market.as_ref().map(|c| c.configs.clone()),
            weights: *weights,
            master_seed: self.master_seed,
        })
    }
}

/// Log-returns of the blended paths (`(t_steps - 1) × N`).
pub fn ensemble_log_returns<T: Real>(ensemble: &WalkEnsemble<T>) -> Matrix<T> {
    let p = &ensemble.paths;
    Matrix::from_fn(p.nrows().saturating_sub(1), p.ncols(), |t, i| {
        p[(t + 1, i)].ln() - p[(t, i)].ln()
    })
}

/// Correlation of the blended walks' log-returns.
pub fn simulated_correlation<T: Real>(ensemble: &WalkEnsemble<T>) -> Result<CorrMatrix<T>> {
    if ensemble.t_steps() < 3 {
        return Err(Error::InsufficientData(format!(
            "simulated correlation needs at least 3 steps, ensemble has {}",
            ensemble.t_steps()
        )));
    }
    let r = ensemble_log_returns(ensemble);
    let values = pearson(&r, &ensemble.tickers)?;
    CorrMatrix::new(ensemble.tickers.clone(), values)
}
