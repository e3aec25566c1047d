//! End-to-end analysis steps shared by the command-line tool and tests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::calibrate::{fit_weights, FitResult, GridSpec};
use crate::corrnet::{correlation_matrix, node_stats, threshold_graph, CorrMatrix, NodeStats, StockGraph};
use crate::error::{Error, Result};
use crate::gbm::{simulated_correlation, universe_labels, BlendWeights, Channel, EnsembleBuilder};
use crate::linalg::Matrix;
use crate::market_data::{estimate_panel_params, log_returns, PricePanel};
use crate::scalar::{mean_std, Real};
use crate::spectral::{
    eigendecompose, mode_projection, rescale_correlation, rescaled_sigma2, select_market_modes,
    MpParams, ObsConvention, RescaledCorrelation, SpectralSplit,
};

pub struct NetworkAnalysis<T> {
    pub corr: CorrMatrix<T>,
    pub n_returns: usize,
    pub graph: StockGraph<T>,
    pub stats: BTreeMap<String, NodeStats<T>>,
}

pub fn analyze_network<T: Real>(panel: &PricePanel<T>, rho_c: T, louvain_seed: u64) -> Result<NetworkAnalysis<T>> {
    let returns = log_returns(panel)?;
    let corr = correlation_matrix(&returns)?;
    let graph = threshold_graph(&corr, rho_c)?;
    let stats = node_stats(&graph, louvain_seed)?;
    Ok(NetworkAnalysis {
        corr,
        n_returns: returns.n_obs(),
        graph,
        stats,
    })
}

pub struct SpectralAnalysis<T> {
    pub split: SpectralSplit<T>,
    pub mp: MpParams<T>,
    /// MP law with σ² = 1 - λ_max / N.
    pub mp_rescaled: MpParams<T>,
    pub market_raw: Matrix<T>,
    pub noise_raw: Matrix<T>,
    pub market: RescaledCorrelation<T>,
    pub noise: RescaledCorrelation<T>,
}

pub fn analyze_spectrum<T: Real>(
    net: &NetworkAnalysis<T>,
    convention: ObsConvention,
    top_fraction: f64,
) -> Result<SpectralAnalysis<T>> {
    let n = net.corr.n();
    let split = eigendecompose(&net.corr)?;
    let q: T = convention.q_ratio(net.n_returns, n);
    let mp = MpParams::new(q, T::one())?;
    let split = select_market_modes(&split, &net.stats, &mp, top_fraction)?;
    let mp_rescaled = MpParams::new(q, rescaled_sigma2(split.eigenvalues[0], n)?)?;
    let market_raw = mode_projection(&split, &split.market_indices)?;
    let noise_raw = mode_projection(&split, &split.noise_indices())?;
    Ok(SpectralAnalysis {
        market: rescale_correlation(&market_raw),
        noise: rescale_correlation(&noise_raw),
        split,
        mp,
        mp_rescaled,
        market_raw,
        noise_raw,
    })
}

/// Mean and (population) standard deviation of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntrySummary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

impl EntrySummary {
    pub fn of<T: Real>(values: &[T]) -> Self {
        let (m, s) = mean_std(values);
        Self {
            count: values.len(),
            mean: m.as_f64(),
            std: s.as_f64(),
        }
    }
}

/// Which correlation component a fit matches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitTarget {
    /// Rescaled market projection, community + market channels.
    Market,
    /// Rescaled noise projection, community + noise channels.
    Noise,
    /// Full correlation matrix, all three channels.
    Full,
}

impl FitTarget {
    pub const ALL: [FitTarget; 3] = [FitTarget::Market, FitTarget::Noise, FitTarget::Full];

    pub fn channels(self) -> Vec<Channel> {
        match self {
            Self::Market => vec![Channel::Community, Channel::Market],
            Self::Noise => vec![Channel::Community, Channel::Noise],
            Self::Full => Channel::ALL.to_vec(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Market => "market",
            Self::Noise => "noise",
            Self::Full => "full",
        }
    }
}

/// Off-diagonal entries of the `target` component of `corr`, using the
/// `n_market` largest modes as the market part.
pub fn component_entries<T: Real>(corr: &CorrMatrix<T>, n_market: usize, target: FitTarget) -> Result<Vec<T>> {
    if target == FitTarget::Full {
        return Ok(corr.off_diagonal());
    }
    let split = eigendecompose(corr)?;
    let indices: Vec<usize> = match target {
        FitTarget::Market => (0..n_market.min(split.n())).collect(),
        _ => (n_market.min(split.n())..split.n()).collect(),
    };
    Ok(rescale_correlation(&mode_projection(&split, &indices)?).off_diagonal())
}

/// Community and market channel assignments for the whole panel, with GBM
/// parameters estimated over the full date range and `t_steps` = number of
/// dates.
pub fn ensemble_builder<T: Real>(
    panel: &PricePanel<T>,
    net: &NetworkAnalysis<T>,
    spectral: &SpectralAnalysis<T>,
) -> Result<EnsembleBuilder<T>> {
    let tickers = panel.tickers().to_vec();
    let (communities, clustering) = universe_labels(&tickers, &net.stats);
    EnsembleBuilder::new(tickers, estimate_panel_params(panel)?, panel.n_dates())?
        .with_communities(&communities, &clustering)?
        .with_market(&net.corr, &spectral.split.market_tickers)
}

pub struct ComponentFit<T> {
    pub target: FitTarget,
    pub result: FitResult<T>,
    pub data_entries: Vec<T>,
    /// Simulated entries at the fitted weights for the first seed.
    pub simulated_entries: Vec<T>,
}

/// Fits the blend weights for one correlation component.
pub fn fit_component<T: Real>(
    builder: &EnsembleBuilder<T>,
    data_corr: &CorrMatrix<T>,
    n_market: usize,
    target: FitTarget,
    grid: GridSpec,
    seeds: &[u64],
) -> Result<ComponentFit<T>> {
    let first = *seeds
        .first()
        .ok_or_else(|| Error::InvalidArgument("fit needs at least one master seed".into()))?;
    let data_entries = component_entries(data_corr, n_market, target)?;
    let components: BTreeMap<u64, _> = seeds
        .iter()
        .map(|&s| builder.components(s).map(|c| (s, c)))
        .collect::<Result<_>>()?;
    let simulate = |w: &BlendWeights<T>, seed: u64| -> Result<Vec<T>> {
        let owned;
        let comps = match components.get(&seed) {
            Some(c) => c,
            None => {
                owned = builder.components(seed)?;
                &owned
            }
        };
        let corr = simulated_correlation(&comps.blend(w)?)?;
        component_entries(&corr, n_market, target)
    };
    let result = fit_weights(&data_entries, simulate, &target.channels(), grid, seeds)?;
    let simulated_entries = simulate(&result.weights, first)?;
    Ok(ComponentFit {
        target,
        result,
        data_entries,
        simulated_entries,
    })
}
