use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Fixed-width histogram with optional density overlays sampled at bin centres.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram<T> {
    pub edges: Vec<T>,
    pub counts: Vec<usize>,
    pub overlays: Vec<(String, Vec<T>)>,
}

impl<T: Real> Histogram<T> {
    /// Bins `values` over `range` (defaults to the data range; a degenerate
    /// range is widened by ±0.5). Values outside the range are ignored; the
    /// upper edge is inclusive.
    pub fn new(values: &[T], bins: usize, range: Option<(T, T)>) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
        }
        let finite = values.iter().copied().filter(|v| v.is_finite());
        let (mut lo, mut hi) = match range {
            Some(r) => r,
            None => finite.fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            }),
        };
        if !lo.is_finite() || !hi.is_finite() {
            lo = T::zero();
            hi = T::one();
        }
        if hi <= lo {
            lo = lo - T::lit(0.5);
            hi = hi + T::lit(0.5);
        }
        let width = (hi - lo) / T::from_usize_lossy(bins);
        let edges: Vec<T> = (0..=bins)
            .map(|k| lo + width * T::from_usize_lossy(k))
            .collect();
        let mut counts = vec![0usize; bins];
        for &v in values {
            if !v.is_finite() || v < lo || v > hi {
                continue;
            }
            let k = ((v - lo) / width).floor().to_usize().unwrap_or(0).min(bins - 1);
            counts[k] += 1;
        }
        Ok(Self {
            edges,
            counts,
            overlays: Vec::new(),
        })
    }

    pub fn centers(&self) -> Vec<T> {
        self.edges
            .windows(2)
            .map(|w| (w[0] + w[1]) / T::lit(2.0))
            .collect()
    }

    /// Normalised density per bin (integrates to the in-range fraction).
    pub fn density(&self) -> Vec<T> {
        let total: usize = self.counts.iter().sum();
        if total == 0 {
            return vec![T::zero(); self.counts.len()];
        }
        let width = self.edges[1] - self.edges[0];
        self.counts
            .iter()
            .map(|&c| T::from_usize_lossy(c) / (T::from_usize_lossy(total) * width))
            .collect()
    }

    pub fn with_overlay(mut self, name: impl Into<String>, f: impl Fn(T) -> T) -> Self {
        let samples = self.centers().into_iter().map(f).collect();
        self.overlays.push((name.into(), samples));
        self
    }

    /// `bin_lo,bin_hi,count,density[,overlay...]`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![
            "bin_lo".to_string(),
            "bin_hi".into(),
            "count".into(),
            "density".into(),
        ];
        header.extend(self.overlays.iter().map(|(n, _)| n.clone()));
        w.write_record(&header)?;
        let density = self.density();
        for k in 0..self.counts.len() {
            let mut rec = vec![
                format!("{:e}", self.edges[k]),
                format!("{:e}", self.edges[k + 1]),
                self.counts[k].to_string(),
                format!("{:e}", density[k]),
            ];
            rec.extend(self.overlays.iter().map(|(_, s)| format!("{:e}", s[k])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
