//! Cross-metric dependence estimation.
//!
//! Four estimators over pairs of series: Pearson (linear), Spearman
//! (monotonic), distance correlation (zero iff independent, V-statistic
//! convention), and plug-in mutual information on an equal-frequency joint
//! histogram. The pairwise matrix runs over standardized daily-mean series;
//! a day enters a pair's estimate only when both metrics have a daily mean
//! that day, since some metrics can start recording later than others.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::caldata::{CalDataError, Dataset, MetricKind};

#[derive(Debug, Error)]
pub enum XcorrError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("zero variance input")]
    ZeroVariance,
    #[error("constant input: distance variance is zero")]
    ZeroDistanceVariance,
    #[error("degenerate input: all values equal")]
    DegenerateInput,
    #[error("need at least 2 bins, got {0}")]
    BadBins(usize),
    #[error("window [{from}, {to}] has only {got} shared days for {metric_a}/{metric_b}, need {needed}")]
    InsufficientWindow {
        from: u32,
        to: u32,
        got: usize,
        needed: usize,
        metric_a: MetricKind,
        metric_b: MetricKind,
    },
    #[error(transparent)]
    CalData(#[from] CalDataError),
}

/// Dependence estimator selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrMethod {
    Pearson,
    Spearman,
    DistanceCorr,
    MutualInfo,
}

impl CorrMethod {
    pub const ALL: [CorrMethod; 4] = [
        CorrMethod::Pearson,
        CorrMethod::Spearman,
        CorrMethod::DistanceCorr,
        CorrMethod::MutualInfo,
    ];

    pub fn code(self) -> &'static str {
        match self {
            CorrMethod::Pearson => "pearson",
            CorrMethod::Spearman => "spearman",
            CorrMethod::DistanceCorr => "dcor",
            CorrMethod::MutualInfo => "mi",
        }
    }
}

impl std::str::FromStr for CorrMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pearson" => Ok(CorrMethod::Pearson),
            "spearman" => Ok(CorrMethod::Spearman),
            "dcor" => Ok(CorrMethod::DistanceCorr),
            "mi" => Ok(CorrMethod::MutualInfo),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

/// Standardize to zero mean and unit variance (population convention).
pub fn standardize(xs: &[f64]) -> Result<Vec<f64>, XcorrError> {
    if xs.len() < 2 {
        return Err(XcorrError::TooShort {
            needed: 2,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if var == 0.0 {
        return Err(XcorrError::ZeroVariance);
    }
    let sd = var.sqrt();
    Ok(xs.iter().map(|x| (x - mean) / sd).collect())
}

fn check_pair(xs: &[f64], ys: &[f64], min_len: usize) -> Result<(), XcorrError> {
    if xs.len() != ys.len() {
        return Err(XcorrError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < min_len {
        return Err(XcorrError::TooShort {
            needed: min_len,
            got: xs.len(),
        });
    }
    Ok(())
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, XcorrError> {
    check_pair(xs, ys, 2)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(XcorrError::ZeroVariance);
    }
    Ok(cov / (vx * vy).sqrt())
}

/// Midranks with average-rank tie handling, 1-based.
fn midranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson of midranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, XcorrError> {
    check_pair(xs, ys, 2)?;
    pearson(&midranks(xs), &midranks(ys))
}

/// Distance correlation (biased V-statistic convention), in [0, 1].
///
/// Two passes keep memory at O(n): row means of the pairwise distance
/// matrices first, then the double-centered product accumulation recomputing
/// distances on the fly.
pub fn distance_correlation(xs: &[f64], ys: &[f64]) -> Result<f64, XcorrError> {
    check_pair(xs, ys, 4)?;
    let n = xs.len();
    let nf = n as f64;

    let row_means = |v: &[f64]| -> (Vec<f64>, f64) {
        let mut rows = vec![0.0; n];
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += (v[j] - v[k]).abs();
            }
            rows[j] = s / nf;
        }
        let grand = rows.iter().sum::<f64>() / nf;
        (rows, grand)
    };
    let (ax_rows, ax_grand) = row_means(xs);
    let (ay_rows, ay_grand) = row_means(ys);

    let mut vxy = 0.0;
    let mut vxx = 0.0;
    let mut vyy = 0.0;
    for j in 0..n {
        for k in 0..n {
            let a = (xs[j] - xs[k]).abs() - ax_rows[j] - ax_rows[k] + ax_grand;
            let b = (ys[j] - ys[k]).abs() - ay_rows[j] - ay_rows[k] + ay_grand;
            vxy += a * b;
            vxx += a * a;
            vyy += b * b;
        }
    }
    vxy /= nf * nf;
    vxx /= nf * nf;
    vyy /= nf * nf;
    if vxx <= 0.0 || vyy <= 0.0 {
        return Err(XcorrError::ZeroDistanceVariance);
    }
    Ok((vxy.max(0.0) / (vxx * vyy).sqrt()).sqrt())
}

/// Default equal-frequency bin count: floor(sqrt(n/5)) clamped to [2, 16].
pub fn default_mi_bins(n: usize) -> usize {
    (((n as f64) / 5.0).sqrt().floor() as usize).clamp(2, 16)
}

/// Assign each value its equal-frequency (quantile) bin in [0, n_bins).
/// Ties share a bin, so the assignment is invariant under any strictly
/// increasing map of the values.
fn quantile_bins(xs: &[f64], n_bins: usize) -> Vec<usize> {
    let n = xs.len();
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    // Upper thresholds of the first n_bins-1 bins.
    let thresholds: Vec<f64> = (1..n_bins)
        .map(|j| sorted[(j * n / n_bins).saturating_sub(1).min(n - 1)])
        .collect();
    xs.iter()
        .map(|&x| thresholds.iter().filter(|&&t| x > t).count())
        .collect()
}

/// Plug-in mutual information in nats on an equal-frequency joint histogram.
pub fn mutual_information(xs: &[f64], ys: &[f64], n_bins: usize) -> Result<f64, XcorrError> {
    check_pair(xs, ys, 2)?;
    if n_bins < 2 {
        return Err(XcorrError::BadBins(n_bins));
    }
    let degenerate = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if degenerate(xs) || degenerate(ys) {
        return Err(XcorrError::DegenerateInput);
    }
    let bx = quantile_bins(xs, n_bins);
    let by = quantile_bins(ys, n_bins);
    let mut joint = vec![0.0f64; n_bins * n_bins];
    for (&i, &j) in bx.iter().zip(&by) {
        joint[i * n_bins + j] += 1.0;
    }
    let n = xs.len() as f64;
    let mut px = vec![0.0; n_bins];
    let mut py = vec![0.0; n_bins];
    for i in 0..n_bins {
        for j in 0..n_bins {
            px[i] += joint[i * n_bins + j];
            py[j] += joint[i * n_bins + j];
        }
    }
    let mut mi = 0.0;
    for i in 0..n_bins {
        for j in 0..n_bins {
            let c = joint[i * n_bins + j];
            if c > 0.0 {
                let pij = c / n;
                mi += pij * (pij * n * n / (px[i] * py[j])).ln();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// Symmetric pairwise dependence matrix over metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrMatrix {
    pub metric_order: Vec<MetricKind>,
    pub method: CorrMethod,
    pub values: Vec<Vec<f64>>,
    pub window: (u32, u32),
}

impl CorrMatrix {
    pub fn get(&self, a: MetricKind, b: MetricKind) -> f64 {
        let i = self.metric_order.iter().position(|&m| m == a).expect("metric in matrix");
        let j = self.metric_order.iter().position(|&m| m == b).expect("metric in matrix");
        self.values[i][j]
    }

    /// CSV rendering with metric codes as header and row labels.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric");
        for m in &self.metric_order {
            out.push(',');
            out.push_str(m.code());
        }
        out.push('\n');
        for (i, m) in self.metric_order.iter().enumerate() {
            out.push_str(m.code());
            for v in &self.values[i] {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Minimum shared days required per metric pair in the window.
pub const MIN_WINDOW_DAYS: usize = 20;

/// Pairwise dependence between standardized daily-mean series of all
/// metrics over a day window.
///
/// Diagonal entries keep each method's self-dependence convention: 1 for the
/// correlation coefficients, the binned self-information for mutual
/// information.
pub fn metric_correlation_matrix(
    ds: &Dataset,
    method: CorrMethod,
    window: (u32, u32),
) -> Result<CorrMatrix, XcorrError> {
    let metrics: Vec<MetricKind> = MetricKind::ALL.to_vec();
    let mut series = Vec::with_capacity(metrics.len());
    for &m in &metrics {
        let daily = ds.daily_mean(m, Some(window))?;
        series.push(daily.points);
    }

    let k = metrics.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            // Pairwise-complete: keep days present in both series.
            let (xi, yj) = intersect_days(&series[i], &series[j]);
            if xi.len() < MIN_WINDOW_DAYS {
                return Err(XcorrError::InsufficientWindow {
                    from: window.0,
                    to: window.1,
                    got: xi.len(),
                    needed: MIN_WINDOW_DAYS,
                    metric_a: metrics[i],
                    metric_b: metrics[j],
                });
            }
            let xs = standardize(&xi)?;
            let ys = standardize(&yj)?;
            let v = match method {
                CorrMethod::Pearson => pearson(&xs, &ys)?,
                CorrMethod::Spearman => spearman(&xs, &ys)?,
                CorrMethod::DistanceCorr => distance_correlation(&xs, &ys)?,
                CorrMethod::MutualInfo => {
                    mutual_information(&xs, &ys, default_mi_bins(xs.len()))?
                }
            };
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    Ok(CorrMatrix {
        metric_order: metrics,
        method,
        values,
        window,
    })
}

fn intersect_days(a: &[(u32, f64)], b: &[(u32, f64)]) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                xs.push(a[i].1);
                ys.push(b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    (xs, ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn seeded_uniform(n: usize, tag: u64) -> Vec<f64> {
        let mut rng = crate::seed::rng(100, &[tag]);
        (0..n).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn standardize_basics() {
        assert_eq!(standardize(&[0.0, 2.0]).unwrap(), vec![-1.0, 1.0]);
        assert!(matches!(
            standardize(&[5.0, 5.0, 5.0]).unwrap_err(),
            XcorrError::ZeroVariance
        ));
        // Affine invariance for a > 0.
        let xs = seeded_uniform(50, 1);
        let mapped: Vec<f64> = xs.iter().map(|x| 3.0 * x + 7.0).collect();
        let a = standardize(&xs).unwrap();
        let b = standardize(&mapped).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        // Output moments.
        let mean: f64 = a.iter().sum::<f64>() / a.len() as f64;
        let var: f64 = a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / a.len() as f64;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_exact_cases() {
        let xs = seeded_uniform(100, 2);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &xs).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_nonlinearity_has_no_linear_or_monotone_signal() {
        let mut rng = crate::seed::rng(3, &[0x9]);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert!(pearson(&xs, &ys).unwrap().abs() < 0.05);
        assert!(spearman(&xs, &ys).unwrap().abs() < 0.05);
    }

    #[test]
    fn spearman_monotone_maps_give_unit_correlation() {
        let xs = seeded_uniform(200, 4);
        let exp: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let neg_cube: Vec<f64> = xs.iter().map(|x| -x.powi(3)).collect();
        assert!((spearman(&xs, &exp).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&xs, &neg_cube).unwrap() + 1.0).abs() < 1e-12);
        // Invariance under strictly increasing maps.
        let log_map: Vec<f64> = xs.iter().map(|x| (x + 1.5).ln()).collect();
        let ys = seeded_uniform(200, 5);
        assert!(
            (spearman(&xs, &ys).unwrap() - spearman(&log_map, &ys).unwrap()).abs() < 1e-12
        );
    }

    #[test]
    fn dcor_identical_is_one_and_independent_is_small() {
        let xs = seeded_uniform(2000, 6);
        assert!((distance_correlation(&xs, &xs).unwrap() - 1.0).abs() < 1e-12);
        let ys = seeded_uniform(2000, 7);
        let d = distance_correlation(&xs, &ys).unwrap();
        assert!(d < 0.08, "independent dcor = {d}");
    }

    #[test]
    fn dcor_detects_symmetric_nonlinearity() {
        let mut rng = crate::seed::rng(8, &[0xa]);
        let xs: Vec<f64> = (0..2000).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let d = distance_correlation(&xs, &ys).unwrap();
        assert!(d > 0.4, "dcor = {d}");
        assert!(pearson(&xs, &ys).unwrap().abs() < 0.05);
    }

    #[test]
    fn dcor_matches_naive_materialized_formula() {
        // Independent oracle: full double-centered matrices held in memory.
        fn naive_dcor(xs: &[f64], ys: &[f64]) -> f64 {
            let n = xs.len();
            let centered = |v: &[f64]| -> Vec<f64> {
                let mut d = vec![0.0; n * n];
                for j in 0..n {
                    for k in 0..n {
                        d[j * n + k] = (v[j] - v[k]).abs();
                    }
                }
                let rows: Vec<f64> =
                    (0..n).map(|j| (0..n).map(|k| d[j * n + k]).sum::<f64>() / n as f64).collect();
                let grand = rows.iter().sum::<f64>() / n as f64;
                let mut out = vec![0.0; n * n];
                for j in 0..n {
                    for k in 0..n {
                        out[j * n + k] = d[j * n + k] - rows[j] - rows[k] + grand;
                    }
                }
                out
            };
            let a = centered(xs);
            let b = centered(ys);
            let nn = (n * n) as f64;
            let vxy: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / nn;
            let vxx: f64 = a.iter().map(|x| x * x).sum::<f64>() / nn;
            let vyy: f64 = b.iter().map(|y| y * y).sum::<f64>() / nn;
            (vxy.max(0.0) / (vxx * vyy).sqrt()).sqrt()
        }
        let mut rng = crate::seed::rng(12, &[0xb]);
        let xs: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| x.sin() + 0.3 * rng.random::<f64>())
            .collect();
        let fast = distance_correlation(&xs, &ys).unwrap();
        let slow = naive_dcor(&xs, &ys);
        assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
    }

    #[test]
    fn dcor_invariances() {
        let xs = seeded_uniform(300, 8);
        let ys = seeded_uniform(300, 9);
        let base = distance_correlation(&xs, &ys).unwrap();
        // Positive scaling and translation of either argument.
        let xs2: Vec<f64> = xs.iter().map(|x| 4.0 * x - 2.0).collect();
        let ys2: Vec<f64> = ys.iter().map(|y| 0.5 * y + 9.0).collect();
        let same = distance_correlation(&xs2, &ys2).unwrap();
        assert!((base - same).abs() < 1e-10);
        assert!(matches!(
            distance_correlation(&vec![1.0; 10], &ys[..10].to_vec()).unwrap_err(),
            XcorrError::ZeroDistanceVariance
        ));
    }

    #[test]
    fn dcor_independent_below_permutation_null_quantile() {
        let xs = seeded_uniform(400, 20);
        let ys = seeded_uniform(400, 21);
        let observed = distance_correlation(&xs, &ys).unwrap();
        let mut null = Vec::with_capacity(200);
        let mut perm = ys.clone();
        let mut rng = crate::seed::rng(99, &[0xcc]);
        for _ in 0..200 {
            // Fisher-Yates shuffle.
            for i in (1..perm.len()).rev() {
                let j = rng.random_range(0..=i);
                perm.swap(i, j);
            }
            null.push(distance_correlation(&xs, &perm).unwrap());
        }
        null.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q99 = null[(0.99 * (null.len() - 1) as f64) as usize];
        assert!(
            observed < q99,
            "observed {observed} not below 99th null percentile {q99}"
        );
    }

    #[test]
    fn mi_independent_is_small_and_identity_is_log_bins() {
        let mut rng = crate::seed::rng(10, &[0xc]);
        let xs: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let mi = mutual_information(&xs, &ys, 8).unwrap();
        assert!(mi < 0.02, "independent MI = {mi}");

        // y = x with n divisible by the bin count: exactly ln(8).
        let xs: Vec<f64> = (0..4000).map(|i| i as f64).collect();
        let mi = mutual_information(&xs, &xs, 8).unwrap();
        assert!((mi - (8.0f64).ln()).abs() < 1e-12, "MI = {mi}");
    }

    #[test]
    fn mi_detects_quadratic_dependence() {
        let mut rng = crate::seed::rng(11, &[0xd]);
        let xs: Vec<f64> = (0..2000).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let mi = mutual_information(&xs, &ys, 8).unwrap();
        assert!(mi > 0.5, "MI = {mi}");
    }

    #[test]
    fn mi_invariant_under_increasing_maps() {
        let xs = seeded_uniform(500, 12);
        let ys = seeded_uniform(500, 13);
        let base = mutual_information(&xs, &ys, 8).unwrap();
        let xs2: Vec<f64> = xs.iter().map(|x| (5.0 * x).exp()).collect();
        let mapped = mutual_information(&xs2, &ys, 8).unwrap();
        assert!((base - mapped).abs() < 1e-12);
        assert!(matches!(
            mutual_information(&vec![2.0; 100], &ys[..100].to_vec(), 8).unwrap_err(),
            XcorrError::DegenerateInput
        ));
    }

    #[test]
    fn estimators_are_symmetric() {
        let xs = seeded_uniform(300, 14);
        let ys: Vec<f64> = xs
            .iter()
            .zip(seeded_uniform(300, 15))
            .map(|(x, e)| x + 0.5 * e)
            .collect();
        assert_eq!(pearson(&xs, &ys).unwrap(), pearson(&ys, &xs).unwrap());
        assert_eq!(spearman(&xs, &ys).unwrap(), spearman(&ys, &xs).unwrap());
        let d1 = distance_correlation(&xs, &ys).unwrap();
        let d2 = distance_correlation(&ys, &xs).unwrap();
        assert!((d1 - d2).abs() < 1e-12);
        assert_eq!(
            mutual_information(&xs, &ys, 6).unwrap(),
            mutual_information(&ys, &xs, 6).unwrap()
        );
    }

    #[test]
    fn matrix_is_symmetric_with_unit_diagonal() {
        use crate::synthdev::{default_scenario, generate_corpus};
        let ds = generate_corpus(&default_scenario(1)).unwrap();
        let m = metric_correlation_matrix(&ds, CorrMethod::Pearson, (0, 99)).unwrap();
        for i in 0..6 {
            assert!((m.values[i][i] - 1.0).abs() < 1e-12);
            for j in 0..6 {
                assert_eq!(m.values[i][j], m.values[j][i]);
            }
        }
    }

    #[test]
    fn matrix_rejects_insufficient_window() {
        use crate::synthdev::{default_scenario, generate_corpus};
        let ds = generate_corpus(&default_scenario(1)).unwrap();
        assert!(matches!(
            metric_correlation_matrix(&ds, CorrMethod::Pearson, (0, 5)).unwrap_err(),
            XcorrError::InsufficientWindow { .. }
        ));
    }

    #[test]
    fn pairwise_complete_uses_shared_days_only() {
        let (xs, ys) = intersect_days(
            &[(0, 1.0), (1, 2.0), (3, 3.0), (5, 4.0)],
            &[(1, 10.0), (2, 20.0), (3, 30.0), (5, 50.0)],
        );
        assert_eq!(xs, vec![2.0, 3.0, 4.0]);
        assert_eq!(ys, vec![10.0, 30.0, 50.0]);
    }
}
