//! Additive seasonal-trend decomposition by loess, and dataset profiles
//! built from it.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::{mean_power, Loess};

/// `input == trend + seasonal + residual` elementwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<f64>,
    pub period: usize,
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.trend.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trend.is_empty()
    }

    /// Seasonal component averaged over the complete cycles; a partial
    /// trailing cycle is ignored.
    pub fn seasonal_one_period(&self) -> Vec<f64> {
        fold_one_period(&self.seasonal, self.period)
    }

    /// CSV with columns `t,input,trend,seasonal,residual`.
    pub fn write_csv<W: Write>(&self, input: &[f64], w: W) -> Result<()> {
        if input.len() != self.len() {
            return Err(Error::Shape(format!(
                "input has {} points, decomposition {}",
                input.len(),
                self.len()
            )));
        }
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
        out.write_record(["t", "input", "trend", "seasonal", "residual"]).map_err(io)?;
        for t in 0..self.len() {
            out.write_record([
                t.to_string(),
                format!("{:?}", input[t]),
                format!("{:?}", self.trend[t]),
                format!("{:?}", self.seasonal[t]),
                format!("{:?}", self.residual[t]),
            ])
            .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn fold_one_period(x: &[f64], period: usize) -> Vec<f64> {
    let cycles = x.len() / period;
    let mut out = vec![0.0; period];
    if cycles == 0 {
        return out;
    }
    for c in 0..cycles {
        for (o, v) in out.iter_mut().zip(&x[c * period..(c + 1) * period]) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= cycles as f64);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StlConfig {
    /// Points per cycle-subseries loess window (all points if fewer).
    pub seasonal_window: usize,
    pub inner_iterations: usize,
}

impl Default for StlConfig {
    fn default() -> Self {
        Self {
            seasonal_window: 7,
            inner_iterations: 2,
        }
    }
}

fn odd_at_least(v: f64) -> usize {
    let c = v.ceil().max(1.0) as usize;
    if c.is_multiple_of(2) {
        c + 1
    } else {
        c
    }
}

/// Trend window: smallest odd integer `>= 1.5 p / (1 - 1.5 / n_s)`.
pub fn trend_window(period: usize, seasonal_window: usize) -> usize {
    let ns = seasonal_window.max(3) as f64;
    odd_at_least(1.5 * period as f64 / (1.0 - 1.5 / ns))
}

/// Low-pass window: smallest odd integer `>= p`.
pub fn lowpass_window(period: usize) -> usize {
    odd_at_least(period as f64)
}

pub fn stl_decompose(x: &[f64], period: usize, iterations: usize) -> Result<Decomposition> {
    stl_decompose_with(
        x,
        period,
        &StlConfig {
            inner_iterations: iterations,
            ..StlConfig::default()
        },
    )
}

pub fn check_period(len: usize, period: usize) -> Result<()> {
    if period < 2 || len < 2 * period {
        return Err(Error::Config(format!(
            "period {period} needs 2 <= period <= len/2 (len {len})"
        )));
    }
    Ok(())
}

pub fn stl_decompose_with(x: &[f64], period: usize, cfg: &StlConfig) -> Result<Decomposition> {
    let n = x.len();
    check_period(n, period)?;
    if cfg.inner_iterations == 0 {
        return Err(Error::Config("STL needs at least one inner iteration".into()));
    }
    if cfg.seasonal_window < 1 {
        return Err(Error::Config("seasonal window must be positive".into()));
    }
    let p = period;
    let lowpass = Loess::new(lowpass_window(p), 1)?;
    let trend_smoother = Loess::new(trend_window(p, cfg.seasonal_window), 1)?;

    let mut trend = vec![0.0; n];
    let mut seasonal = vec![0.0; n];
    let mut detrended = vec![0.0; n];
    let mut cycle = vec![0.0; n + 2 * p];
    for _ in 0..cfg.inner_iterations {
        for i in 0..n {
            detrended[i] = x[i] - trend[i];
        }
        // Cycle-subseries smoothing, each subseries extended one step on
        // both sides. `cycle[j]` holds time `j - p`.
        for phase in 0..p {
            let sub: Vec<f64> = detrended[phase..].iter().step_by(p).copied().collect();
            let m = sub.len();
            let window = cfg.seasonal_window.min(m).max(2);
            let smoother = Loess::new(window, 1)?;
            for j in -1..=(m as isize) {
                let t = phase as isize + j * p as isize + p as isize;
                if t >= 0 && (t as usize) < n + 2 * p {
                    cycle[t as usize] = smoother.fit_at(&sub, j as f64);
                }
            }
        }
        let low = lowpass.smooth(&moving_average(
            &moving_average(&moving_average(&cycle, p), p),
            3,
        ));
        debug_assert_eq!(low.len(), n);
        for i in 0..n {
            seasonal[i] = cycle[i + p] - low[i];
        }
        let deseasonalized: Vec<f64> = x.iter().zip(&seasonal).map(|(a, b)| a - b).collect();
        trend = trend_smoother.smooth(&deseasonalized);
    }
    let residual = (0..n).map(|i| x[i] - trend[i] - seasonal[i]).collect();
    Ok(Decomposition {
        trend,
        seasonal,
        residual,
        period,
    })
}

fn moving_average(x: &[f64], w: usize) -> Vec<f64> {
    let out_len = x.len() + 1 - w;
    let mut out = Vec::with_capacity(out_len);
    let mut acc: f64 = x[..w].iter().sum();
    out.push(acc / w as f64);
    for i in w..x.len() {
        acc += x[i] - x[i - w];
        out.push(acc / w as f64);
    }
    out
}

/// `len/2, len/4, len/8, len/16` (floored), deduplicated, keeping those
/// that are valid periods for `len`.
pub fn default_periods(len: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for d in [2, 4, 8, 16] {
        let p = len / d;
        if check_period(len, p).is_ok() && !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// Components of one sample at one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleComponents {
    pub trend: Vec<f64>,
    pub seasonal_one_period: Vec<f64>,
    /// Mean power of the full trend component.
    pub p_trend: f64,
    /// Mean power of the full seasonal component.
    pub p_season: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodProfile {
    pub period: usize,
    pub mean_trend: Vec<f64>,
    /// Length `period`.
    pub mean_seasonal_one_period: Vec<f64>,
    /// Average of the per-sample trend powers.
    pub p_trend: f64,
    /// Average of the per-sample seasonal powers.
    pub p_season: f64,
    #[serde(skip)]
    pub samples: Vec<SampleComponents>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub sample_len: usize,
    pub num_samples: usize,
    pub periods: Vec<PeriodProfile>,
}

impl DatasetProfile {
    pub fn periods_used(&self) -> Vec<usize> {
        self.periods.iter().map(|p| p.period).collect()
    }
}

/// Profiles every sample of `ds` at each period. Per-sample work runs in
/// parallel; the averages are summed in sample order, so the result does
/// not depend on scheduling.
pub fn dataset_profile(ds: &LabeledDataset, periods: &[usize], cfg: &StlConfig) -> Result<DatasetProfile> {
    if ds.is_empty() {
        return Err(Error::Shape("cannot profile an empty dataset".into()));
    }
    let n = ds.sample_len();
    if let Some((i, s)) = ds.samples.iter().enumerate().find(|(_, s)| s.len() != n) {
        return Err(Error::Shape(format!(
            "sample {i} has length {} but sample 0 has length {n}",
            s.len()
        )));
    }
    if periods.is_empty() {
        return Err(Error::Config("at least one period is required".into()));
    }
    for &p in periods {
        check_period(n, p)?;
    }
    let profiles = periods
        .iter()
        .map(|&p| period_profile(ds, p, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetProfile {
        sample_len: n,
        num_samples: ds.len(),
        periods: profiles,
    })
}

fn period_profile(ds: &LabeledDataset, period: usize, cfg: &StlConfig) -> Result<PeriodProfile> {
    let samples = ds
        .samples
        .par_iter()
        .map(|s| {
            let d = stl_decompose_with(&s.values, period, cfg)?;
            Ok(SampleComponents {
                p_trend: mean_power(&d.trend)?,
                p_season: mean_power(&d.seasonal)?,
                seasonal_one_period: d.seasonal_one_period(),
                trend: d.trend,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let count = samples.len() as f64;
    let n = ds.sample_len();
    let mut mean_trend = vec![0.0; n];
    let mut mean_seasonal = vec![0.0; period];
    let (mut p_trend, mut p_season) = (0.0, 0.0);
    for s in &samples {
        mean_trend.iter_mut().zip(&s.trend).for_each(|(m, v)| *m += v);
        mean_seasonal
            .iter_mut()
            .zip(&s.seasonal_one_period)
            .for_each(|(m, v)| *m += v);
        p_trend += s.p_trend;
        p_season += s.p_season;
    }
    mean_trend.iter_mut().for_each(|m| *m /= count);
    mean_seasonal.iter_mut().for_each(|m| *m /= count);
    Ok(PeriodProfile {
        period,
        mean_trend,
        mean_seasonal_one_period: mean_seasonal,
        p_trend: p_trend / count,
        p_season: p_season / count,
        samples,
    })
}
