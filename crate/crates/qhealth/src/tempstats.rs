//! Temporal and distributional statistics over metric series.
//!
//! Covers the sample autocorrelation function with its 95% white-noise band,
//! pooled summary statistics, empirical distributions, instability rankings,
//! and a robust sudden-drop detector. All statistics use the population
//! (divide-by-n) convention. Series with gaps are reduced to their longest
//! contiguous run before the ACF, since the estimator assumes regular
//! sampling; `n_effective` reports the run actually used.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::caldata::{Dataset, MetricKind, MetricSeries, TargetId};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("series too short: need {needed} contiguous points, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("empty input")]
    EmptyInput,
    #[error("need at least {needed} bins, got {got}")]
    BadBinCount { needed: usize, got: usize },
    #[error("max_lag must be >= 1")]
    BadMaxLag,
}

/// Sample autocorrelation with a white-noise confidence band.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcfResult {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    /// 95% band half-width, 1.96/sqrt(n).
    pub ci_halfwidth: f64,
    /// Length of the contiguous run the ACF was computed on.
    pub n_effective: usize,
}

/// Sample autocorrelation r(l) up to `max_lag` on the series' longest
/// contiguous day run.
pub fn acf(series: &MetricSeries, max_lag: usize) -> Result<AcfResult, StatsError> {
    if max_lag < 1 {
        return Err(StatsError::BadMaxLag);
    }
    let run = series.longest_contiguous_run();
    let needed = max_lag + 10;
    if run.len() < needed {
        return Err(StatsError::SeriesTooShort {
            needed,
            got: run.len(),
        });
    }
    let xs: Vec<f64> = run.iter().map(|&(_, v)| v).collect();
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let denom: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    if denom == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let mut values = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let num: f64 = (0..n - lag)
            .map(|t| (xs[t] - mean) * (xs[t + lag] - mean))
            .sum();
        values.push(num / denom);
    }
    Ok(AcfResult {
        lags: (0..=max_lag).collect(),
        values,
        ci_halfwidth: 1.96 / (n as f64).sqrt(),
        n_effective: n,
    })
}

/// One metric's cross-target ACF summary at the requested lags.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcfTableRow {
    pub metric: MetricKind,
    pub lags: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub n_targets: usize,
    pub n_excluded: usize,
}

/// Per-metric mean and std of per-target ACF values at the given lags.
///
/// Targets whose series are too short or constant are excluded and counted,
/// never aborting the table.
pub fn acf_lag_table(
    ds: &Dataset,
    metrics: &[MetricKind],
    lags: &[usize],
) -> Vec<AcfTableRow> {
    let max_lag = lags.iter().copied().max().unwrap_or(1);
    metrics
        .iter()
        .map(|&metric| {
            let targets: Vec<TargetId> = ds
                .targets()
                .into_iter()
                .filter(|t| t.is_coupler() == metric.attaches_to_coupler())
                .collect();
            let per_target: Vec<Option<Vec<f64>>> = targets
                .par_iter()
                .map(|&t| {
                    let s = ds.series(t, metric);
                    if s.is_empty() {
                        return None;
                    }
                    acf(&s, max_lag)
                        .ok()
                        .map(|r| lags.iter().map(|&l| r.values[l]).collect())
                })
                .collect();
            let rows: Vec<&Vec<f64>> = per_target.iter().flatten().collect();
            let n_included = rows.len();
            let n_excluded = per_target.iter().filter(|r| r.is_none()).count();
            let mut mean = vec![0.0; lags.len()];
            let mut std = vec![0.0; lags.len()];
            if n_included > 0 {
                for (i, _) in lags.iter().enumerate() {
                    let vals: Vec<f64> = rows.iter().map(|r| r[i]).collect();
                    let m = vals.iter().sum::<f64>() / n_included as f64;
                    let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>()
                        / n_included as f64;
                    mean[i] = m;
                    std[i] = v.sqrt();
                }
            }
            AcfTableRow {
                metric,
                lags: lags.to_vec(),
                mean,
                std,
                n_targets: n_included,
                n_excluded,
            }
        })
        .collect()
}

/// Moment summary of a series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Standardized third moment; 0 for constant data.
    pub skewness: f64,
    pub n: usize,
    /// Fraction of points more than 3 sigma below the mean.
    pub lower_tail_frac: f64,
}

/// Population-convention summary statistics of the series values.
pub fn summary(series: &MetricSeries) -> Result<SummaryStats, StatsError> {
    summary_values(&series.values())
}

/// Summary statistics over a raw value slice.
pub fn summary_values(values: &[f64]) -> Result<SummaryStats, StatsError> {
    let n = values.len();
    if n < 2 {
        return Err(StatsError::SeriesTooShort { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    let std = var.sqrt();
    let skewness = if std > 0.0 {
        values.iter().map(|v| ((v - mean) / std).powi(3)).sum::<f64>() / nf
    } else {
        0.0
    };
    let lower_tail_frac = if std > 0.0 {
        values.iter().filter(|&&v| v < mean - 3.0 * std).count() as f64 / nf
    } else {
        0.0
    };
    Ok(SummaryStats {
        mean,
        std,
        min: values.iter().cloned().fold(f64::INFINITY, f64::min),
        max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        skewness,
        n,
        lower_tail_frac,
    })
}

/// Equal-width histogram with a normalized density.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Density: counts / (n * bin width); integrates to 1.
    pub normalized: Vec<f64>,
}

/// Equal-width histogram over [min, max], right-closed last bin.
/// An all-equal input gets a degenerate range padded by ±0.5.
pub fn histogram(values: &[f64], n_bins: usize) -> Result<Histogram, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if n_bins < 2 {
        return Err(StatsError::BadBinCount {
            needed: 2,
            got: n_bins,
        });
    }
    let mut lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0u64; n_bins];
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    let edges: Vec<f64> = (0..=n_bins).map(|i| lo + width * i as f64).collect();
    let nf = values.len() as f64;
    let normalized = counts.iter().map(|&c| c as f64 / (nf * width)).collect();
    Ok(Histogram {
        edges,
        counts,
        normalized,
    })
}

/// Freedman-Diaconis bin count, clamped to [10, 100].
pub fn fd_bin_count(values: &[f64]) -> usize {
    let n = values.len();
    if n < 2 {
        return 10;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let q = |p: f64| -> f64 {
        let idx = p * (n - 1) as f64;
        let lo = idx.floor() as usize;
        let hi = idx.ceil() as usize;
        let frac = idx - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    };
    let iqr = q(0.75) - q(0.25);
    let range = sorted[n - 1] - sorted[0];
    if iqr <= 0.0 || range <= 0.0 {
        return 10;
    }
    let width = 2.0 * iqr / (n as f64).cbrt();
    ((range / width).ceil() as usize).clamp(10, 100)
}

/// Targets ranked by the population std of their series, most unstable
/// first; ties broken by ascending target order. Targets with fewer than two
/// points are skipped.
pub fn instability_ranking(ds: &Dataset, metric: MetricKind) -> Vec<(TargetId, f64)> {
    let mut rows: Vec<(TargetId, f64)> = ds
        .targets()
        .into_iter()
        .filter(|t| t.is_coupler() == metric.attaches_to_coupler())
        .filter_map(|t| {
            let s = ds.series(t, metric);
            summary(&s).ok().map(|st| (t, st.std))
        })
        .collect();
    rows.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite std")
            .then_with(|| a.0.cmp(&b.0))
    });
    rows
}

/// Default rolling window of the drop detector, in days.
pub const DROP_WINDOW: usize = 31;

/// Flag days whose value falls more than `z_threshold` robust sigmas below
/// the rolling median.
///
/// The scale is the rolling MAD times 1.4826 (the Gaussian-consistent
/// factor), so heavy lower tails do not desensitize the detector the way a
/// mean/std rule would. Returns flagged (day, z score) pairs in day order.
pub fn drop_detector(
    series: &MetricSeries,
    z_threshold: f64,
) -> Result<Vec<(u32, f64)>, StatsError> {
    let n = series.len();
    if n < 20 {
        return Err(StatsError::SeriesTooShort { needed: 20, got: n });
    }
    let values = series.values();
    let half = DROP_WINDOW / 2;
    let mut flags = Vec::new();
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        let mut window: Vec<f64> = values[lo..hi].to_vec();
        let med = median_in_place(&mut window);
        let mut dev: Vec<f64> = values[lo..hi].iter().map(|v| (v - med).abs()).collect();
        let mad = median_in_place(&mut dev);
        // Guard against a zero MAD in locally constant windows.
        let scale = (1.4826 * mad).max(1e-12 * med.abs()).max(1e-300);
        let z = (med - values[i]) / scale;
        if values[i] < med && z > z_threshold {
            flags.push((series.points[i].0, z));
        }
    }
    Ok(flags)
}

fn median_in_place(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
