use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use netcorr::calibrate::{write_fit_overlay, GridSpec};
use netcorr::corrnet::export::{write_edge_list, write_int_histogram, write_node_attributes};
use netcorr::corrnet::{degree_sequence, modularity_of_labels};
use netcorr::histogram::Histogram;
use netcorr::market_data::{clean_universe, load_price_panel, load_price_panel_with_sectors};
use netcorr::pipeline::{
    analyze_network, analyze_spectrum, ensemble_builder, fit_component, EntrySummary, FitTarget, NetworkAnalysis,
    SpectralAnalysis,
};
use netcorr::portfolio::{compare_strategies, write_cumulative_csv, BacktestOptions};
use netcorr::spectral::{eigenvalue_histogram, write_labeled_matrix};
use netcorr::PricePanel64;
use serde::Serialize;

use crate::config::RunConfig;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<S: Serialize>(dir: &Path, name: &str, value: &S) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

fn out_dir(cfg: &RunConfig, sub: &str) -> Result<PathBuf> {
    let dir = cfg.out_dir.join(sub);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub fn load_panel(cfg: &RunConfig) -> Result<PricePanel64> {
    let raw = match &cfg.sectors {
        Some(s) => load_price_panel_with_sectors(&cfg.prices, s)?,
        None => load_price_panel(&cfg.prices)?,
    };
    let panel = clean_universe(&raw)?;
    let dropped = raw.n_tickers() - panel.n_tickers();
    println!(
        "panel: {} tickers x {} dates ({} dropped for missing prices)",
        panel.n_tickers(),
        panel.n_dates(),
        dropped
    );
    Ok(panel)
}

#[derive(Serialize)]
struct NetworkSummary {
    rho_c: f64,
    tickers: usize,
    nodes: usize,
    edges: usize,
    communities: usize,
    modularity: f64,
}

fn histogram_csv(dir: &Path, name: &str, values: &[f64], bins: usize) -> Result<()> {
    Histogram::new(values, bins, None)?.write_csv(create(dir, name)?)?;
    Ok(())
}

pub fn network(cfg: &RunConfig, panel: &PricePanel64) -> Result<NetworkAnalysis<f64>> {
    let dir = out_dir(cfg, "network")?;
    let net = analyze_network(panel, cfg.rho_c, cfg.louvain_seed)?;
    let g = &net.graph;
    write_edge_list(g, create(&dir, "edges.csv")?)?;
    write_node_attributes(g, &net.stats, panel.sectors(), create(&dir, "nodes.csv")?)?;
    write_int_histogram(&degree_sequence(g), create(&dir, "degree_hist.csv")?)?;
    let column = |f: fn(&netcorr::NodeStats64) -> f64| -> Vec<f64> {
        g.nodes().iter().map(|t| f(&net.stats[t])).collect()
    };
    histogram_csv(&dir, "eigencentrality_hist.csv", &column(|s| s.eigencentrality), cfg.bins)?;
    histogram_csv(&dir, "pagerank_hist.csv", &column(|s| s.pagerank), cfg.bins)?;
    histogram_csv(&dir, "clustering_hist.csv", &column(|s| s.clustering), cfg.bins)?;
    let labels: Vec<usize> = g.nodes().iter().map(|t| net.stats[t].community).collect();
    let communities = labels.iter().max().map_or(0, |m| m + 1);
    let summary = NetworkSummary {
        rho_c: cfg.rho_c,
        tickers: panel.n_tickers(),
        nodes: g.node_count(),
        edges: g.edge_count(),
        communities,
        modularity: modularity_of_labels(g, &labels),
    };
    write_json(&dir, "summary.json", &summary)?;
    println!(
        "network: {} nodes, {} edges, {} communities at rho_c = {}",
        summary.nodes, summary.edges, summary.communities, cfg.rho_c
    );
    Ok(net)
}

#[derive(Serialize)]
struct SpectralSummary {
    n: usize,
    q: f64,
    lambda_max: f64,
    mp_lambda_plus: f64,
    rescaled_sigma2: f64,
    rescaled_lambda_plus: f64,
    n_market: usize,
    market_tickers: Vec<String>,
    market_eigenvalues: Vec<f64>,
    correlation: EntrySummary,
    market: EntrySummary,
    noise: EntrySummary,
}

pub fn spectral(cfg: &RunConfig, net: &NetworkAnalysis<f64>) -> Result<SpectralAnalysis<f64>> {
    let dir = out_dir(cfg, "spectral")?;
    let sa = analyze_spectrum(net, cfg.obs_convention, cfg.top_fraction)?;
    let split = &sa.split;
    split.write_spectrum_csv(create(&dir, "spectrum.csv")?)?;
    eigenvalue_histogram(split, cfg.bins, None, &[("mp", sa.mp), ("mp_rescaled", sa.mp_rescaled)])?
        .write_csv(create(&dir, "eigenvalue_hist.csv")?)?;
    // Bulk of the spectrum only, where the MP overlays are readable.
    let bulk_hi = sa.mp.lambda_plus * 1.5;
    eigenvalue_histogram(split, cfg.bins, Some((0.0, bulk_hi)), &[("mp", sa.mp), ("mp_rescaled", sa.mp_rescaled)])?
        .write_csv(create(&dir, "eigenvalue_bulk_hist.csv")?)?;
    let corr_entries = net.corr.off_diagonal();
    let market_entries = sa.market.off_diagonal();
    let noise_entries = sa.noise.off_diagonal();
    let range = Some((-1.0, 1.0));
    Histogram::new(&corr_entries, cfg.bins, range)?.write_csv(create(&dir, "correlation_hist.csv")?)?;
    Histogram::new(&market_entries, cfg.bins, range)?.write_csv(create(&dir, "market_hist.csv")?)?;
    Histogram::new(&noise_entries, cfg.bins, range)?.write_csv(create(&dir, "noise_hist.csv")?)?;
    write_labeled_matrix(&split.tickers, &sa.market_raw, create(&dir, "market_matrix.csv")?)?;
    write_labeled_matrix(&split.tickers, &sa.noise_raw, create(&dir, "noise_matrix.csv")?)?;
    let summary = SpectralSummary {
        n: split.n(),
        q: sa.mp.q,
        lambda_max: split.eigenvalues[0],
        mp_lambda_plus: sa.mp.lambda_plus,
        rescaled_sigma2: sa.mp_rescaled.sigma2,
        rescaled_lambda_plus: sa.mp_rescaled.lambda_plus,
        n_market: split.n_market(),
        market_tickers: split.market_tickers.clone(),
        market_eigenvalues: split.market_indices.iter().map(|&k| split.eigenvalues[k]).collect(),
        correlation: EntrySummary::of(&corr_entries),
        market: EntrySummary::of(&market_entries),
        noise: EntrySummary::of(&noise_entries),
    };
    write_json(&dir, "summary.json", &summary)?;
    println!(
        "spectral: lambda_max = {:.2}, MP edge = {:.3} (rescaled {:.3}), {} market modes {:?}",
        summary.lambda_max, summary.mp_lambda_plus, summary.rescaled_lambda_plus, summary.n_market, summary.market_tickers
    );
    println!(
        "spectral: market entries mean {:.3} std {:.3}; noise entries mean {:.3} std {:.3}",
        summary.market.mean, summary.market.std, summary.noise.mean, summary.noise.std
    );
    Ok(sa)
}

#[derive(Serialize)]
struct FitSummary {
    target: FitTarget,
    result: netcorr::FitResult64,
    data: EntrySummary,
    simulated: EntrySummary,
}

pub fn fit(cfg: &RunConfig, panel: &PricePanel64, net: &NetworkAnalysis<f64>, sa: &SpectralAnalysis<f64>) -> Result<()> {
    let dir = out_dir(cfg, "fit")?;
    let builder = ensemble_builder(panel, net, sa)?;
    let grid = GridSpec::with_step(cfg.grid_step)?;
    for target in FitTarget::ALL {
        let fit = fit_component(&builder, &net.corr, sa.split.n_market(), target, grid, &cfg.master_seeds)?;
        let name = target.name();
        write_fit_overlay(
            &fit.data_entries,
            &fit.simulated_entries,
            cfg.bins,
            create(&dir, &format!("{name}_overlay.csv"))?,
        )?;
        let summary = FitSummary {
            target,
            data: EntrySummary::of(&fit.data_entries),
            simulated: EntrySummary::of(&fit.simulated_entries),
            result: fit.result,
        };
        write_json(&dir, &format!("{name}.json"), &summary)?;
        let w = &summary.result.weights;
        println!(
            "fit {name}: w_L = {:.3}, w_M = {:.3}, w_N = {:.3}, W1 = {:.4} ({} evaluations)",
            w.community, w.market, w.noise, summary.result.distance, summary.result.evaluations
        );
    }
    Ok(())
}

pub fn backtest(cfg: &RunConfig, panel: &PricePanel64) -> Result<()> {
    let dir = out_dir(cfg, "backtest")?;
    let options = BacktestOptions {
        r_f: cfg.risk_free,
        min_weight: cfg.min_weight,
        sim: Some(cfg.simulated_market()),
    };
    let report = compare_strategies(panel, &cfg.dt, cfg.runs, cfg.backtest_seed, &options)?;
    write_json(&dir, "comparison.json", &report)?;
    for r in &report.results {
        write_cumulative_csv(r, create(&dir, &format!("cumulative_dt{}.csv", r.dt))?)?;
        println!(
            "backtest dt = {:>3}: historical {:+.1}%, simulated mean {:+.1}% [{:+.1}%, {:+.1}%]",
            r.dt,
            100.0 * r.historical_return,
            100.0 * r.simulated_mean,
            100.0 * r.simulated_min,
            100.0 * r.simulated_max
        );
    }
    Ok(())
}
