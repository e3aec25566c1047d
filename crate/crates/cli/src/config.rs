use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use netcorr::gbm::BlendWeights;
use netcorr::portfolio::{SimulatedMarketConfig, DEFAULT_DT_GRID, DEFAULT_MIN_WEIGHT};
use netcorr::spectral::{ObsConvention, DEFAULT_TOP_FRACTION};
use serde::{Deserialize, Serialize};

/// Everything a run needs; all randomness is seeded from here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub prices: PathBuf,
    pub sectors: Option<PathBuf>,
    pub rho_c: f64,
    pub top_fraction: f64,
    pub louvain_seed: u64,
    pub obs_convention: ObsConvention,
    pub bins: usize,
    pub master_seeds: Vec<u64>,
    pub grid_step: f64,
    pub dt: Vec<usize>,
    pub runs: usize,
    pub backtest_seed: u64,
    pub min_weight: f64,
    pub risk_free: f64,
    pub simulation: SimulationSettings,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            prices: PathBuf::new(),
            sectors: None,
            rho_c: 0.9,
            top_fraction: DEFAULT_TOP_FRACTION,
            louvain_seed: 0,
            obs_convention: ObsConvention::Returns,
            bins: 50,
            master_seeds: vec![1, 2, 3],
            grid_step: 0.02,
            dt: DEFAULT_DT_GRID.to_vec(),
            runs: 10,
            backtest_seed: 1,
            min_weight: DEFAULT_MIN_WEIGHT,
            risk_free: 0.0,
            simulation: SimulationSettings::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Ensemble settings of the simulated-market backtest strategy; its network
/// threshold, top fraction and Louvain seed follow the run-level values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    pub weights: BlendWeights<f64>,
    pub sim_steps: Option<usize>,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        let d = SimulatedMarketConfig::default();
        Self {
            weights: d.weights,
            sim_steps: d.sim_steps,
        }
    }
}

impl RunConfig {
    pub fn simulated_market(&self) -> SimulatedMarketConfig {
        SimulatedMarketConfig {
            rho_c: self.rho_c,
            top_fraction: self.top_fraction,
            weights: self.simulation.weights,
            sim_steps: self.simulation.sim_steps,
            louvain_seed: self.louvain_seed,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // Relative input paths are resolved against the config file.
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if cfg.prices.is_relative() && !cfg.prices.as_os_str().is_empty() {
            cfg.prices = base.join(&cfg.prices);
        }
        if let Some(s) = &cfg.sectors {
            if s.is_relative() {
                cfg.sectors = Some(base.join(s));
            }
        }
        Ok(cfg)
    }

    /// Sets the run seeds from one base value: fit seeds `seed..seed + k`
    /// (keeping the configured count), backtest base seed `seed`.
    pub fn apply_seed(&mut self, seed: u64) {
        let k = self.master_seeds.len().max(1) as u64;
        self.master_seeds = (0..k).map(|i| seed.wrapping_add(i)).collect();
        self.backtest_seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        if self.prices.as_os_str().is_empty() {
            bail!("no price panel given (set `prices` in the config or pass --prices)");
        }
        if !self.prices.is_file() {
            bail!("price panel {} does not exist", self.prices.display());
        }
        if let Some(s) = &self.sectors {
            if !s.is_file() {
                bail!("sector file {} does not exist", s.display());
            }
        }
        if !(0.0..=1.0).contains(&self.rho_c) {
            bail!("rho_c must lie in [0, 1], got {}", self.rho_c);
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            bail!("top_fraction must lie in (0, 1], got {}", self.top_fraction);
        }
        if self.bins == 0 {
            bail!("bins must be positive");
        }
        if self.master_seeds.is_empty() {
            bail!("at least one master seed is required");
        }
        if !(self.grid_step > 0.0 && self.grid_step <= 0.5) {
            bail!("grid_step must lie in (0, 0.5], got {}", self.grid_step);
        }
        if self.dt.is_empty() || self.dt.iter().any(|&d| d < 2) {
            bail!("dt list must be non-empty with every interval at least 2 days");
        }
        BlendWeights::new(
            self.simulation.weights.community,
            self.simulation.weights.market,
            self.simulation.weights.noise,
        )?;
        if self.runs == 0 {
            bail!("runs must be at least 1");
        }
        Ok(())
    }
}
