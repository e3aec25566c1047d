//! `netcorr`: correlation-network, spectral, calibration and backtest runs
//! over a daily price panel.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "netcorr", version, about = "Market/noise analysis of stock correlations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Threshold network, node statistics and histograms.
    Network,
    /// Spectrum, Marchenko-Pastur overlays and market/noise matrices.
    Spectral,
    /// Blend-weight fits for the market, noise and full correlations.
    Fit,
    /// Historical vs simulated-market max-Sharpe backtests.
    Backtest,
    /// Every step above.
    All,
}

#[derive(Args)]
struct Overrides {
    /// JSON run configuration.
    #[arg(long, global = true, env = "NETCORR_CONFIG")]
    config: Option<PathBuf>,
    /// Price panel CSV (overrides the config).
    #[arg(long, global = true, env = "NETCORR_PRICES")]
    prices: Option<PathBuf>,
    /// Sector CSV (overrides the config).
    #[arg(long, global = true, env = "NETCORR_SECTORS")]
    sectors: Option<PathBuf>,
    #[arg(long, global = true, env = "NETCORR_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Base seed for fits and backtests.
    #[arg(long, global = true, env = "NETCORR_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, env = "NETCORR_RHO_C")]
    rho_c: Option<f64>,
    /// Rebalance intervals in days, comma separated.
    #[arg(long, global = true, env = "NETCORR_DT", value_delimiter = ',')]
    dt: Option<Vec<usize>>,
    #[arg(long, global = true, env = "NETCORR_RUNS")]
    runs: Option<usize>,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.prices {
            cfg.prices = p.clone();
        }
        if let Some(p) = &self.sectors {
            cfg.sectors = Some(p.clone());
        }
        if let Some(d) = &self.out_dir {
            cfg.out_dir = d.clone();
        }
        if let Some(s) = self.seed {
            cfg.apply_seed(s);
        }
        if let Some(r) = self.rho_c {
            cfg.rho_c = r;
        }
        if let Some(dt) = &self.dt {
            cfg.dt = dt.clone();
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.overrides.resolve()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let panel = commands::load_panel(&cfg)?;
    let cmd = cli.command;
    if cmd == Command::Backtest {
        return commands::backtest(&cfg, &panel);
    }
    let net = commands::network(&cfg, &panel)?;
    if cmd == Command::Network {
        return Ok(());
    }
    let sa = commands::spectral(&cfg, &net)?;
    if cmd == Command::Spectral {
        return Ok(());
    }
    commands::fit(&cfg, &panel, &net, &sa)?;
    if cmd == Command::All {
        commands::backtest(&cfg, &panel)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
