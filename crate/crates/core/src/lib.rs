//! Market/noise decomposition of stock-return correlations.
//!
//! The pipeline runs from price panels ([`market_data`]) to a thresholded
//! correlation network ([`corrnet`]), a random-matrix split of the spectrum
//! into market and noise modes ([`spectral`]), correlated GBM ensembles that
//! reproduce those components ([`gbm`]), Wasserstein calibration of the blend
//! weights ([`calibrate`]) and a max-Sharpe rebalancing backtest
//! ([`portfolio`]).
//!
//! Every numeric type is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

// Negated comparisons deliberately send NaN down the rejection path.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod corrnet;
pub mod error;
pub mod gbm;
pub mod histogram;
pub mod linalg;
pub mod market_data;
pub mod pipeline;
pub mod portfolio;
pub mod rng;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Matrix64 = linalg::Matrix<f64>;
pub type PricePanel64 = market_data::PricePanel<f64>;
pub type ReturnPanel64 = market_data::ReturnPanel<f64>;
pub type GbmParams64 = market_data::GbmParams<f64>;
pub type CorrMatrix64 = corrnet::CorrMatrix<f64>;
pub type StockGraph64 = corrnet::StockGraph<f64>;
pub type NodeStats64 = corrnet::NodeStats<f64>;
pub type SpectralSplit64 = spectral::SpectralSplit<f64>;
pub type MpParams64 = spectral::MpParams<f64>;
pub type BlendWeights64 = gbm::BlendWeights<f64>;
pub type WalkEnsemble64 = gbm::WalkEnsemble<f64>;
pub type FitResult64 = calibrate::FitResult<f64>;
pub type PortfolioWeights64 = portfolio::PortfolioWeights<f64>;
pub type BacktestReport64 = portfolio::BacktestReport<f64>;
