//! Blend-weight fitting by Wasserstein-1 matching of correlation entries.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corrnet::CorrMatrix;
use crate::error::{Error, Result};
use crate::gbm::{BlendWeights, Channel};
use crate::histogram::Histogram;
use crate::scalar::Real;
use crate::spectral::RescaledCorrelation;

pub const DEFAULT_GRID_STEPS: usize = 50;
pub const DEFAULT_FIT_SEEDS: [u64; 3] = [1, 2, 3];

/// Wasserstein-1 distance between two empirical distributions, the integral
/// of `|F_a⁻¹(u) - F_b⁻¹(u)|` over `u ∈ (0, 1)`.
pub fn wasserstein_1d<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("wasserstein_1d needs non-empty samples".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("wasserstein_1d samples contain NaN".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("no NaN"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("no NaN"));
    if a.len() == b.len() {
        let s: T = a.iter().zip(&b).map(|(&x, &y)| (x - y).abs()).sum();
        return Ok(s / T::from_usize_lossy(a.len()));
    }
    // Merge the quantile breakpoints i/n and j/m in exact integer arithmetic:
    // u is tracked as u·n·m.
    let (n, m) = (a.len(), b.len());
    let nm = T::from_usize_lossy(n) * T::from_usize_lossy(m);
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0usize;
    let mut total = T::zero();
    while i < n && j < m {
        let next_a = (i + 1) * m;
        let next_b = (j + 1) * n;
        let next = next_a.min(next_b);
        total = total + T::from_usize_lossy(next - u) * (a[i] - b[j]).abs();
        u = next;
        if next_a == next {
            i += 1;
        }
        if next_b == next {
            j += 1;
        }
    }
    Ok(total / nm)
}

/// Correlation-entry samples compared by the fit: the upper off-diagonal
/// entries (defined entries only for rescaled projections).
pub trait CorrelationEntries<T> {
    fn entries(&self) -> Vec<T>;
}

impl<T: Real> CorrelationEntries<T> for CorrMatrix<T> {
    fn entries(&self) -> Vec<T> {
        self.off_diagonal()
    }
}

impl<T: Real> CorrelationEntries<T> for RescaledCorrelation<T> {
    fn entries(&self) -> Vec<T> {
        self.off_diagonal()
    }
}

impl<T: Real> CorrelationEntries<T> for Vec<T> {
    fn entries(&self) -> Vec<T> {
        self.clone()
    }
}

/// Uniform grid over the weight simplex: every weight is a multiple of
/// `1 / steps` in `[lower, upper]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub steps: usize,
    pub step: f64,
    pub lower: f64,
    pub upper: f64,
}

impl GridSpec {
    pub fn new(steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid resolution must be at least 2 steps, got {steps}"
            )));
        }
        Ok(Self {
            steps,
            step: 1.0 / steps as f64,
            lower: 0.0,
            upper: 1.0,
        })
    }

    /// Grid with the given step size, rounded to the nearest whole number of steps.
    pub fn with_step(step: f64) -> Result<Self> {
        if !(step > 0.0 && step <= 0.5) {
            return Err(Error::InvalidArgument(format!("grid step must be in (0, 0.5], got {step}")));
        }
        Self::new((1.0 / step).round() as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    pub weights: BlendWeights<T>,
    pub active: Vec<Channel>,
    pub distance: T,
    /// Number of distinct weight vectors evaluated.
    pub evaluations: usize,
    pub grid_spec: GridSpec,
    pub ensemble_seeds: Vec<u64>,
}

impl<T: Real + Serialize> FitResult<T> {
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}

/// All compositions of `total` into `parts` non-negative integers, in
/// lexicographic order.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn half_step_neighbours(center: &[usize]) -> Vec<Vec<usize>> {
    let k = center.len();
    let mut out = Vec::new();
    for up in 0..k {
        for down in 0..k {
            if up != down && center[down] > 0 {
                let mut p = center.to_vec();
                p[up] += 1;
                p[down] -= 1;
                out.push(p);
            }
        }
    }
    out
}

/// Fits blend weights over the `active` channels.
///
/// Weight vectors are the points of the uniform simplex grid; the objective
/// is the mean over `master_seeds` of the W₁ distance between `target` and
/// the entries of `simulator(weights, seed)`. The grid
/// minimiser (ties to the lexicographically smallest vector in
/// community, market, noise order) is refined once over its half-step
/// neighbours.
pub fn fit_weights<T, S, F>(
    target: &[T],
    simulator: F,
    active: &[Channel],
    grid: GridSpec,
    master_seeds: &[u64],
) -> Result<FitResult<T>>
where
    T: Real,
    S: CorrelationEntries<T>,
    F: Fn(&BlendWeights<T>, u64) -> Result<S> + Sync,
{
    if master_seeds.is_empty() {
        return Err(Error::InvalidArgument("fit needs at least one master seed".into()));
    }
    if grid.steps < 2 {
        return Err(Error::InvalidArgument("grid resolution must be at least 2".into()));
    }
    if target.is_empty() {
        return Err(Error::InvalidArgument("fit target is empty".into()));
    }
    let mut channels = active.to_vec();
    channels.sort();
    channels.dedup();
    if channels.is_empty() {
        return Err(Error::InvalidArgument("no active channels".into()));
    }

    // Points are integer vectors in half-step units summing to 2·steps.
    let units = 2 * grid.steps;
    let weights_of = |p: &[usize]| -> Result<BlendWeights<T>> {
        let v: Vec<T> = p
            .iter()
            .map(|&k| T::from_usize_lossy(k) / T::from_usize_lossy(units))
            .collect();
        BlendWeights::from_active(&channels, &v)
    };
    let objective = |p: &Vec<usize>| -> Result<T> {
        let w = weights_of(p)?;
        let mut sum = T::zero();
        for &seed in master_seeds {
            let sim = simulator(&w, seed).map_err(|e| Error::Simulation {
                weights: w.to_vec().iter().map(|x| x.as_f64()).collect(),
                source: Box::new(e),
            })?;
            sum = sum + wasserstein_1d(target, &sim.entries())?;
        }
        Ok(sum / T::from_usize_lossy(master_seeds.len()))
    };
    let mut evaluated: BTreeMap<Vec<usize>, T> = BTreeMap::new();
    let evaluate = |evaluated: &mut BTreeMap<Vec<usize>, T>, points: Vec<Vec<usize>>| -> Result<()> {
        let fresh: Vec<Vec<usize>> = points
            .into_iter()
            .filter(|p| !evaluated.contains_key(p))
            .collect();
        let values: Vec<Result<T>> = fresh.par_iter().map(&objective).collect();
        for (p, v) in fresh.into_iter().zip(values) {
            evaluated.insert(p, v?);
        }
        Ok(())
    };

    let coarse: Vec<Vec<usize>> = compositions(grid.steps, channels.len())
        .into_iter()
        .map(|p| p.into_iter().map(|k| 2 * k).collect())
        .collect();
    evaluate(&mut evaluated, coarse.clone())?;
    let best_grid = argmin(coarse.iter().map(|p| (p, evaluated[p])));
    evaluate(&mut evaluated, half_step_neighbours(&best_grid))?;
    let mut candidates = half_step_neighbours(&best_grid);
    candidates.push(best_grid);
    let best = argmin(candidates.iter().map(|p| (p, evaluated[p])));
    let distance = evaluated[&best];
    Ok(FitResult {
        weights: weights_of(&best)?,
        active: channels,
        distance,
        evaluations: evaluated.len(),
        grid_spec: grid,
        ensemble_seeds: master_seeds.to_vec(),
    })
}

/// Smallest value; ties go to the lexicographically smallest point.
fn argmin<'a, T: Real>(items: impl Iterator<Item = (&'a Vec<usize>, T)>) -> Vec<usize> {
    let mut best: Option<(&Vec<usize>, T)> = None;
    for (p, v) in items {
        best = match best {
            None => Some((p, v)),
            Some((bp, bv)) => {
                if v < bv || (v == bv && p < bp) || (bv.is_nan() && !v.is_nan()) {
                    Some((p, v))
                } else {
                    Some((bp, bv))
                }
            }
        };
    }
    best.expect("non-empty grid").0.clone()
}

/// Data and simulated correlation-entry densities on shared bins:
/// `bin_lo,bin_hi,data_density,simulated_density`.
pub fn write_fit_overlay<T: Real, W: Write>(
    data: &[T],
    simulated: &[T],
    bins: usize,
    writer: W,
) -> Result<()> {
    let range = Some((-T::one(), T::one()));
    let hd = Histogram::new(data, bins, range)?;
    let hs = Histogram::new(simulated, bins, range)?;
    let (dd, ds) = (hd.density(), hs.density());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["bin_lo", "bin_hi", "data_density", "simulated_density"])?;
    for k in 0..bins {
        w.write_record([
            format!("{:e}", hd.edges[k]),
            format!("{:e}", hd.edges[k + 1]),
            format!("{:e}", dd[k]),
            format!("{:e}", ds[k]),
        ])?;
    }
    w.flush()?;
    Ok(())
}
