//! Health scoring, recalibration advice, noise-model GHZ estimation, and
//! connected qubit-subset recommendation for circuit mapping.
//!
//! The GHZ estimator is a product/exponential noise model, not a state
//! simulation: one single-qubit gate on the chain head, one two-qubit gate
//! per chain edge, readout on every qubit, and an exponential decoherence
//! factor over the circuit duration. Its absolute value is a stand-in; the
//! ordering it induces over subsets is what the recommendations and cluster
//! validation rely on.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::caldata::{Dataset, MetricKind, TargetId};
use crate::cluster::ClusterAssignment;
use crate::graphembed::DeviceTopology;
use crate::tempstats::{self, StatsError};
use crate::xcorr::CorrMatrix;

#[derive(Debug, Error)]
pub enum HealthError {
    #[error("window [{0}, {1}] spans fewer than {2} days")]
    InsufficientWindow(u32, u32, u32),
    #[error("qubit {qubit} has no {metric} data in the window")]
    MissingMetric { qubit: u32, metric: MetricKind },
    #[error("consecutive qubits {0} and {1} share no coupler")]
    DisconnectedPath(u32, u32),
    #[error("subset contains duplicate qubit {0}")]
    DuplicateQubit(u32),
    #[error("subset is empty")]
    EmptySubset,
    #[error("k = {k} out of range 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("k = {0} exceeds the exhaustive limit {1}; rerun in greedy mode")]
    ExhaustiveLimit(usize, usize),
    #[error("component weights must sum to 1, got {0}")]
    BadWeights(f64),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Linear score ramp: 0 at or below the floor, 1 at or above the ceiling.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScoreRamp {
    pub floor: f64,
    pub ceiling: f64,
}

impl ScoreRamp {
    pub fn apply(&self, x: f64) -> f64 {
        ((x - self.floor) / (self.ceiling - self.floor)).clamp(0.0, 1.0)
    }
}

/// Weights, ramps, and thresholds of the health pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HealthConfig {
    pub w_coherence: f64,
    pub w_readout: f64,
    pub w_gate: f64,
    pub w_stability: f64,
    pub t1_ramp: ScoreRamp,
    pub t2echo_ramp: ScoreRamp,
    pub readout_ramp: ScoreRamp,
    pub f1q_ramp: ScoreRamp,
    pub f2q_ramp: ScoreRamp,
    /// Robust z threshold feeding the sudden-drop flags.
    pub drop_z: f64,
    /// High-variance flag fires when a metric's std exceeds this multiple of
    /// the cross-qubit median std (scale-free, so affine rescaling of the
    /// raw series cannot change the flag set).
    pub variance_ratio: f64,
    /// Two-qubit gate layer time in microseconds for the GHZ estimator.
    pub t_2q_gate_us: f64,
    /// Score below which a targeted recalibration is advised.
    pub targeted_threshold: f64,
    /// Fraction of qubits that must share a drop span for a global action.
    pub global_fraction: f64,
}

impl Default for HealthConfig {
    fn default() -> Self {
        HealthConfig {
            w_coherence: 0.3,
            w_readout: 0.2,
            w_gate: 0.3,
            w_stability: 0.2,
            t1_ramp: ScoreRamp { floor: 10.0, ceiling: 60.0 },
            t2echo_ramp: ScoreRamp { floor: 5.0, ceiling: 30.0 },
            readout_ramp: ScoreRamp { floor: 0.9, ceiling: 0.99 },
            f1q_ramp: ScoreRamp { floor: 0.99, ceiling: 0.999 },
            f2q_ramp: ScoreRamp { floor: 0.95, ceiling: 0.995 },
            drop_z: 5.0,
            variance_ratio: 2.0,
            t_2q_gate_us: 0.04,
            targeted_threshold: 0.5,
            global_fraction: 0.6,
        }
    }
}

impl HealthConfig {
    fn check_weights(&self) -> Result<(), HealthError> {
        let sum = self.w_coherence + self.w_readout + self.w_gate + self.w_stability;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(HealthError::BadWeights(sum));
        }
        Ok(())
    }
}

/// Diagnostic flags attached to a qubit's health score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HealthFlag {
    SuddenDrop { metric: MetricKind, day: u32, z: f64 },
    HighVariance { metric: MetricKind },
    LowFidelity { metric: MetricKind },
    TlsSuspect,
}

/// Named sub-scores in [0, 1].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ComponentScores {
    pub coherence: f64,
    pub readout: f64,
    pub gate: f64,
    pub stability: f64,
}

/// One qubit's health summary over a window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HealthScore {
    pub target: TargetId,
    /// Convex combination of the components with the configured weights.
    pub score: f64,
    pub components: ComponentScores,
    pub flags: Vec<HealthFlag>,
}

/// Minimum window span for health scoring, days.
pub const MIN_HEALTH_WINDOW: u32 = 14;

/// Window means per qubit and per coupler, the shared input of the health
/// and GHZ computations.
#[derive(Debug, Clone)]
pub struct WindowMeans {
    pub n_qubits: usize,
    pub t1: Vec<f64>,
    pub t2echo: Vec<f64>,
    pub readout: Vec<f64>,
    pub f1q: Vec<f64>,
    pub f2q: BTreeMap<(u32, u32), f64>,
}

impl WindowMeans {
    pub fn compute(ds: &Dataset, window: (u32, u32)) -> Result<Self, HealthError> {
        let n_qubits = ds.qubits().iter().copied().max().map_or(0, |m| m as usize + 1);
        let mean_of = |target: TargetId, metric: MetricKind| -> Result<f64, HealthError> {
            let s = ds.series(target, metric).window(window.0, window.1);
            if s.is_empty() {
                let qubit = match target {
                    TargetId::Qubit(q) => q,
                    TargetId::Coupler(a, _) => a,
                };
                return Err(HealthError::MissingMetric { qubit, metric });
            }
            Ok(s.values().iter().sum::<f64>() / s.len() as f64)
        };
        let mut t1 = Vec::with_capacity(n_qubits);
        let mut t2echo = Vec::with_capacity(n_qubits);
        let mut readout = Vec::with_capacity(n_qubits);
        let mut f1q = Vec::with_capacity(n_qubits);
        for q in 0..n_qubits as u32 {
            t1.push(mean_of(TargetId::Qubit(q), MetricKind::T1)?);
            t2echo.push(mean_of(TargetId::Qubit(q), MetricKind::T2Echo)?);
            readout.push(mean_of(TargetId::Qubit(q), MetricKind::ReadoutFidelity)?);
            f1q.push(mean_of(TargetId::Qubit(q), MetricKind::Fidelity1Q)?);
        }
        let mut f2q = BTreeMap::new();
        for c in ds.couplers() {
            if let TargetId::Coupler(a, b) = c {
                f2q.insert((a, b), mean_of(c, MetricKind::Fidelity2Q)?);
            }
        }
        Ok(WindowMeans {
            n_qubits,
            t1,
            t2echo,
            readout,
            f1q,
            f2q,
        })
    }

    /// Mean two-qubit fidelity over couplers incident to `q`.
    pub fn incident_f2q(&self, q: u32) -> Option<f64> {
        let vals: Vec<f64> = self
            .f2q
            .iter()
            .filter(|((a, b), _)| *a == q || *b == q)
            .map(|(_, &v)| v)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

/// Health scores for every qubit over the window.
pub fn health_scores(
    ds: &Dataset,
    window: (u32, u32),
    cfg: &HealthConfig,
) -> Result<Vec<HealthScore>, HealthError> {
    cfg.check_weights()?;
    let (from, to) = window;
    if to < from || to - from + 1 < MIN_HEALTH_WINDOW {
        return Err(HealthError::InsufficientWindow(from, to, MIN_HEALTH_WINDOW));
    }
    let means = WindowMeans::compute(ds, window)?;
    let n = means.n_qubits;

    // Per-metric series stds across qubits drive stability ranks and the
    // variance flags.
    let metric_stds: Vec<Vec<f64>> = MetricKind::SINGLE_QUBIT
        .iter()
        .map(|&metric| {
            (0..n as u32)
                .map(|q| {
                    let s = ds.series(TargetId::Qubit(q), metric).window(from, to);
                    tempstats::summary(&s).map(|st| st.std).unwrap_or(0.0)
                })
                .collect()
        })
        .collect();

    // Normalized instability rank per qubit: mean over metrics of
    // rank/(n-1), competition ranking (rank = count of strictly smaller
    // stds) so tied qubits share a rank and an all-equal device ranks 0.
    let mut norm_rank = vec![0.0f64; n];
    if n > 1 {
        for stds in &metric_stds {
            for q in 0..n {
                let rank = stds.iter().filter(|&&s| s < stds[q]).count();
                norm_rank[q] += rank as f64 / (n - 1) as f64;
            }
        }
        for r in norm_rank.iter_mut() {
            *r /= metric_stds.len() as f64;
        }
    }

    let median = |v: &mut Vec<f64>| -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        if v.is_empty() {
            0.0
        } else if v.len() % 2 == 1 {
            v[v.len() / 2]
        } else {
            0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
        }
    };
    let median_stds: Vec<f64> = metric_stds
        .iter()
        .map(|stds| median(&mut stds.clone()))
        .collect();

    let mut out = Vec::with_capacity(n);
    for q in 0..n as u32 {
        let qi = q as usize;
        let coherence =
            0.5 * (cfg.t1_ramp.apply(means.t1[qi]) + cfg.t2echo_ramp.apply(means.t2echo[qi]));
        let readout = cfg.readout_ramp.apply(means.readout[qi]);
        let f2q_mean = means.incident_f2q(q);
        let gate = match f2q_mean {
            Some(f2) => 0.5 * (cfg.f1q_ramp.apply(means.f1q[qi]) + cfg.f2q_ramp.apply(f2)),
            None => cfg.f1q_ramp.apply(means.f1q[qi]),
        };
        let stability = 1.0 - norm_rank[qi];

        let mut flags = Vec::new();
        for (mi, &metric) in MetricKind::SINGLE_QUBIT.iter().enumerate() {
            let s = ds.series(TargetId::Qubit(q), metric).window(from, to);
            if s.len() >= 20 {
                if let Ok(drops) = tempstats::drop_detector(&s, cfg.drop_z) {
                    for (day, z) in drops {
                        flags.push(HealthFlag::SuddenDrop { metric, day, z });
                    }
                }
            }
            if median_stds[mi] > 0.0
                && metric_stds[mi][qi] > cfg.variance_ratio * median_stds[mi]
            {
                flags.push(HealthFlag::HighVariance { metric });
            }
        }
        if readout == 0.0 {
            flags.push(HealthFlag::LowFidelity {
                metric: MetricKind::ReadoutFidelity,
            });
        }
        if cfg.f1q_ramp.apply(means.f1q[qi]) == 0.0 {
            flags.push(HealthFlag::LowFidelity {
                metric: MetricKind::Fidelity1Q,
            });
        }
        if matches!(f2q_mean, Some(f) if cfg.f2q_ramp.apply(f) == 0.0) {
            flags.push(HealthFlag::LowFidelity {
                metric: MetricKind::Fidelity2Q,
            });
        }
        // A TLS episode suppresses T1 and T2echo together.
        let drop_days = |metric: MetricKind| -> Vec<u32> {
            flags
                .iter()
                .filter_map(|f| match f {
                    HealthFlag::SuddenDrop { metric: m, day, .. } if *m == metric => Some(*day),
                    _ => None,
                })
                .collect()
        };
        let t1_drops = drop_days(MetricKind::T1);
        let t2_drops = drop_days(MetricKind::T2Echo);
        if t1_drops
            .iter()
            .any(|d1| t2_drops.iter().any(|d2| d1.abs_diff(*d2) <= 2))
        {
            flags.push(HealthFlag::TlsSuspect);
        }

        let score = cfg.w_coherence * coherence
            + cfg.w_readout * readout
            + cfg.w_gate * gate
            + cfg.w_stability * stability;
        out.push(HealthScore {
            target: TargetId::Qubit(q),
            score,
            components: ComponentScores {
                coherence,
                readout,
                gate,
                stability,
            },
            flags,
        });
    }
    Ok(out)
}

/// One recommended maintenance action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Action {
    /// Device-wide recalibration: a drop span shared by most qubits.
    GlobalRecalibration {
        day_from: u32,
        day_to: u32,
        affected_fraction: f64,
    },
    /// Recalibrate one underperforming qubit.
    TargetedRecalibration { target: TargetId, score: f64 },
    /// Keep an eye on a high-variance qubit.
    Watch { target: TargetId },
}

/// Action list plus the dependence context it was issued under.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Advice {
    pub actions: Vec<Action>,
    /// T1-T2echo co-movement from the supplied matrix; joint coherence
    /// decay is the signature of a broader failure.
    pub coherence_comovement: f64,
    /// Mean lag-1 autocorrelation per metric, from the supplied table:
    /// short memory supports rapid recalibration cycles.
    pub memory_lag1: Vec<(MetricKind, f64)>,
}

/// Rule engine over health scores.
///
/// Deterministic order: global recalibrations (ascending day), targeted
/// recalibrations (ascending score), then the watch list (ascending target).
pub fn recalibration_advice(
    scores: &[HealthScore],
    corr: &CorrMatrix,
    acf_table: &[tempstats::AcfTableRow],
    cfg: &HealthConfig,
) -> Advice {
    let n = scores.len().max(1);
    let mut actions = Vec::new();

    // (a) Global: >= global_fraction of qubits share a 3-day drop span.
    let drop_days: Vec<Vec<u32>> = scores
        .iter()
        .map(|s| {
            let mut days: Vec<u32> = s
                .flags
                .iter()
                .filter_map(|f| match f {
                    HealthFlag::SuddenDrop { day, .. } => Some(*day),
                    _ => None,
                })
                .collect();
            days.sort_unstable();
            days.dedup();
            days
        })
        .collect();
    let max_day = drop_days.iter().flatten().copied().max().unwrap_or(0);
    let mut qualifying: Vec<(u32, f64)> = Vec::new();
    for start in 0..=max_day {
        let span = start..=start + 2;
        let affected = drop_days
            .iter()
            .filter(|days| days.iter().any(|d| span.contains(d)))
            .count();
        let fraction = affected as f64 / n as f64;
        if fraction >= cfg.global_fraction {
            qualifying.push((start, fraction));
        }
    }
    // Merge overlapping qualifying spans into single actions.
    let mut i = 0;
    while i < qualifying.len() {
        let (start, mut best_fraction) = qualifying[i];
        let mut end = start + 2;
        let mut j = i + 1;
        while j < qualifying.len() && qualifying[j].0 <= end {
            end = qualifying[j].0 + 2;
            best_fraction = best_fraction.max(qualifying[j].1);
            j += 1;
        }
        actions.push(Action::GlobalRecalibration {
            day_from: start,
            day_to: end,
            affected_fraction: best_fraction,
        });
        i = j;
    }

    // (b) Targeted: score below threshold.
    let mut targeted: Vec<&HealthScore> = scores
        .iter()
        .filter(|s| s.score < cfg.targeted_threshold)
        .collect();
    targeted.sort_by(|a, b| {
        a.score
            .partial_cmp(&b.score)
            .expect("finite scores")
            .then(a.target.cmp(&b.target))
    });
    for s in targeted {
        actions.push(Action::TargetedRecalibration {
            target: s.target,
            score: s.score,
        });
    }

    // (c) Watch list: high variance, not already targeted.
    for s in scores {
        let has_variance_flag = s
            .flags
            .iter()
            .any(|f| matches!(f, HealthFlag::HighVariance { .. }));
        if has_variance_flag && s.score >= cfg.targeted_threshold {
            actions.push(Action::Watch { target: s.target });
        }
    }

    let comovement = corr.get(MetricKind::T1, MetricKind::T2Echo);
    let memory_lag1 = acf_table
        .iter()
        .map(|row| {
            let v = row
                .lags
                .iter()
                .position(|&l| l == 1)
                .map(|i| row.mean[i])
                .unwrap_or(f64::NAN);
            (row.metric, v)
        })
        .collect();
    Advice {
        actions,
        coherence_comovement: comovement,
        memory_lag1,
    }
}

/// Product noise-model estimate of GHZ state fidelity prepared along the
/// given qubit order.
///
/// One single-qubit gate on the chain head, one two-qubit gate per
/// consecutive pair (which must share a coupler), readout on every qubit,
/// and exponential decoherence over k two-qubit gate layers:
/// exp(-sum_q t_circ (1/(2 T1_q) + 1/(2 T2echo_q))) with
/// t_circ = k * t_2q_gate.
pub fn ghz_fidelity_estimate(
    ds: &Dataset,
    path: &[u32],
    window: (u32, u32),
    cfg: &HealthConfig,
) -> Result<f64, HealthError> {
    let means = WindowMeans::compute(ds, window)?;
    ghz_from_means(&means, path, cfg)
}

/// GHZ estimate over precomputed window means.
pub fn ghz_from_means(
    means: &WindowMeans,
    path: &[u32],
    cfg: &HealthConfig,
) -> Result<f64, HealthError> {
    if path.is_empty() {
        return Err(HealthError::EmptySubset);
    }
    let mut seen = std::collections::BTreeSet::new();
    for &q in path {
        if !seen.insert(q) {
            return Err(HealthError::DuplicateQubit(q));
        }
        if (q as usize) >= means.n_qubits {
            return Err(HealthError::MissingMetric {
                qubit: q,
                metric: MetricKind::T1,
            });
        }
    }
    let k = path.len();
    let t_circ = k as f64 * cfg.t_2q_gate_us;

    let mut fidelity = means.f1q[path[0] as usize];
    for pair in path.windows(2) {
        let key = (pair[0].min(pair[1]), pair[0].max(pair[1]));
        let f2 = means
            .f2q
            .get(&key)
            .ok_or(HealthError::DisconnectedPath(pair[0], pair[1]))?;
        fidelity *= f2;
    }
    let mut decay_rate = 0.0;
    for &q in path {
        let qi = q as usize;
        fidelity *= means.readout[qi];
        decay_rate += t_circ * (0.5 / means.t1[qi] + 0.5 / means.t2echo[qi]);
    }
    Ok((fidelity * (-decay_rate).exp()).clamp(0.0, 1.0))
}

/// A ranked qubit subset with its best preparation order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetRecommendation {
    /// Qubits in chain (preparation) order.
    pub qubits: Vec<u32>,
    pub induced_edges: Vec<(u32, u32)>,
    pub predicted_ghz_fidelity: f64,
    pub rank: usize,
}

/// Largest k the exhaustive enumerator accepts.
pub const EXHAUSTIVE_K_LIMIT: usize = 7;

/// How subsets are searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    /// Enumerate every connected induced subgraph (k <= 7).
    Exhaustive,
    /// Grow chains greedily by best coupler fidelity (any k).
    Greedy,
}

/// Enumerate all connected induced subgraphs with `k` nodes, each exactly
/// once, by rooted growth with exclusive-neighborhood extension sets.
/// Subsets come back sorted, in lexicographic order.
pub fn connected_subsets(adj: &[Vec<u32>], k: usize) -> Vec<Vec<u32>> {
    let n = adj.len();
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    if k == 1 {
        return (0..n as u32).map(|v| vec![v]).collect();
    }
    for root in 0..n as u32 {
        let ext: Vec<u32> = adj[root as usize]
            .iter()
            .copied()
            .filter(|&u| u > root)
            .collect();
        let mut sub = vec![root];
        extend_subset(adj, root, &mut sub, ext, k, &mut out);
    }
    for s in out.iter_mut() {
        s.sort_unstable();
    }
    out.sort();
    out
}

fn extend_subset(
    adj: &[Vec<u32>],
    root: u32,
    sub: &mut Vec<u32>,
    mut ext: Vec<u32>,
    k: usize,
    out: &mut Vec<Vec<u32>>,
) {
    if sub.len() == k {
        out.push(sub.clone());
        return;
    }
    while let Some(w) = ext.pop() {
        // Exclusive neighbors of w: beyond the root, outside the subset,
        // outside the current extension, and not adjacent to the subset.
        let mut next_ext = ext.clone();
        for &u in &adj[w as usize] {
            if u > root
                && !sub.contains(&u)
                && u != w
                && !next_ext.contains(&u)
                && !sub.iter().any(|&s| adj[s as usize].binary_search(&u).is_ok())
            {
                next_ext.push(u);
            }
        }
        sub.push(w);
        extend_subset(adj, root, sub, next_ext, k, out);
        sub.pop();
    }
}

/// Best Hamiltonian chain of the subset by predicted GHZ fidelity.
/// Returns `None` when the induced subgraph admits no Hamiltonian path.
fn best_chain(
    subset: &[u32],
    means: &WindowMeans,
    cfg: &HealthConfig,
) -> Option<(Vec<u32>, f64)> {
    // Factors common to every chain of the subset.
    let k = subset.len();
    let t_circ = k as f64 * cfg.t_2q_gate_us;
    let mut base = 1.0;
    for &q in subset {
        let qi = q as usize;
        base *= means.readout[qi];
        base *= (-(t_circ * (0.5 / means.t1[qi] + 0.5 / means.t2echo[qi]))).exp();
    }

    let edge_f2q = |a: u32, b: u32| -> Option<f64> {
        means.f2q.get(&(a.min(b), a.max(b))).copied()
    };

    let mut best: Option<(Vec<u32>, f64)> = None;
    let mut path = Vec::with_capacity(k);
    let mut used = vec![false; k];

    fn dfs(
        subset: &[u32],
        edge_f2q: &dyn Fn(u32, u32) -> Option<f64>,
        means: &WindowMeans,
        base: f64,
        path: &mut Vec<u32>,
        used: &mut [bool],
        chain_product: f64,
        best: &mut Option<(Vec<u32>, f64)>,
    ) {
        if path.len() == subset.len() {
            let score = (base * chain_product * means.f1q[path[0] as usize]).clamp(0.0, 1.0);
            let better = match best {
                None => true,
                Some((bp, bs)) => {
                    score > *bs + 1e-15 || ((score - *bs).abs() <= 1e-15 && path.as_slice() < bp.as_slice())
                }
            };
            if better {
                *best = Some((path.clone(), score));
            }
            return;
        }
        for (i, &q) in subset.iter().enumerate() {
            if used[i] {
                continue;
            }
            let f2 = match path.last() {
                None => Some(1.0),
                Some(&last) => edge_f2q(last, q),
            };
            if let Some(f2) = f2 {
                used[i] = true;
                path.push(q);
                dfs(subset, edge_f2q, means, base, path, used, chain_product * f2, best);
                path.pop();
                used[i] = false;
            }
        }
    }
    dfs(subset, &edge_f2q, means, base, &mut path, &mut used, 1.0, &mut best);
    best
}

/// Rank connected k-qubit subsets by predicted GHZ fidelity.
///
/// Exhaustive mode enumerates every connected induced subgraph (k <= 7 on
/// device-sized graphs) and scores each over its best Hamiltonian chain;
/// subsets without a Hamiltonian chain cannot host the linear preparation
/// and are skipped. Ties break lexicographically on the sorted qubit sets.
pub fn recommend_subsets(
    ds: &Dataset,
    topology: &DeviceTopology,
    k: usize,
    top_n: usize,
    window: (u32, u32),
    cfg: &HealthConfig,
    mode: SearchMode,
) -> Result<Vec<SubsetRecommendation>, HealthError> {
    let n = topology.n_qubits as usize;
    if k < 1 || k > n {
        return Err(HealthError::KOutOfRange { k, n });
    }
    if mode == SearchMode::Exhaustive && k > EXHAUSTIVE_K_LIMIT {
        return Err(HealthError::ExhaustiveLimit(k, EXHAUSTIVE_K_LIMIT));
    }
    let means = WindowMeans::compute(ds, window)?;
    let adj = topology.adjacency();

    let mut scored: Vec<(Vec<u32>, Vec<u32>, f64)> = match mode {
        SearchMode::Exhaustive => {
            let subsets = connected_subsets(&adj, k);
            subsets
                .par_iter()
                .filter_map(|subset| {
                    best_chain(subset, &means, cfg)
                        .map(|(chain, score)| (subset.clone(), chain, score))
                })
                .collect()
        }
        SearchMode::Greedy => greedy_chains(topology, &means, k, cfg),
    };

    scored.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .expect("finite fidelity")
            .then_with(|| a.0.cmp(&b.0))
    });
    Ok(scored
        .into_iter()
        .take(top_n)
        .enumerate()
        .map(|(i, (subset, chain, score))| SubsetRecommendation {
            qubits: chain,
            induced_edges: topology.induced_edges(&subset),
            predicted_ghz_fidelity: score,
            rank: i + 1,
        })
        .collect())
}

/// Greedy chain growth: from every seed edge, repeatedly extend whichever
/// chain end has the best-fidelity unused coupler.
fn greedy_chains(
    topology: &DeviceTopology,
    means: &WindowMeans,
    k: usize,
    cfg: &HealthConfig,
) -> Vec<(Vec<u32>, Vec<u32>, f64)> {
    let adj = topology.adjacency();
    let mut results: Vec<(Vec<u32>, Vec<u32>, f64)> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();

    let seeds: Vec<Vec<u32>> = if k == 1 {
        (0..topology.n_qubits).map(|q| vec![q]).collect()
    } else {
        topology.edges.iter().map(|&(a, b)| vec![a, b]).collect()
    };
    for seed in seeds {
        let mut chain = seed;
        while chain.len() < k {
            let mut candidates: Vec<(f64, u32, bool)> = Vec::new();
            for (end, push_front) in [(chain[chain.len() - 1], false), (chain[0], true)] {
                for &u in &adj[end as usize] {
                    if chain.contains(&u) {
                        continue;
                    }
                    if let Some(&f2) = means.f2q.get(&(end.min(u), end.max(u))) {
                        candidates.push((f2, u, push_front));
                    }
                }
            }
            let Some(&(_, u, push_front)) = candidates
                .iter()
                .max_by(|a, b| a.0.partial_cmp(&b.0).expect("finite").then(b.1.cmp(&a.1)))
            else {
                break;
            };
            if push_front {
                chain.insert(0, u);
            } else {
                chain.push(u);
            }
        }
        if chain.len() != k {
            continue;
        }
        let mut subset = chain.clone();
        subset.sort_unstable();
        if !seen.insert(subset.clone()) {
            continue;
        }
        // Score the grown chain and its reverse; the head carries the
        // single-qubit gate factor.
        if let Ok(forward) = ghz_from_means(means, &chain, cfg) {
            let reversed: Vec<u32> = chain.iter().rev().copied().collect();
            let backward = ghz_from_means(means, &reversed, cfg).unwrap_or(0.0);
            let (best_chain, best_score) = if backward > forward {
                (reversed, backward)
            } else {
                (chain, forward)
            };
            results.push((subset, best_chain, best_score));
        }
    }
    results
}

/// Per-cluster GHZ estimate distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterGhzStats {
    pub cluster: usize,
    pub n_qubits: usize,
    pub n_subsets: usize,
    pub mean: f64,
    pub std: f64,
}

/// Cluster validation report: GHZ estimate distributions per cluster.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub k_subset: usize,
    pub per_cluster: Vec<ClusterGhzStats>,
    /// Clusters skipped with the reason (too small, or no connected subsets
    /// admitting a chain).
    pub skipped: Vec<(usize, String)>,
    /// Highest minus lowest cluster mean; absent with fewer than two
    /// reported clusters.
    pub gap: Option<f64>,
}

/// Cap on scored subsets per cluster.
pub const VALIDATE_SUBSET_CAP: usize = 500;

/// For each cluster, the distribution of GHZ estimates over its connected
/// `k_subset`-qubit subsets (up to a deterministic cap, lexicographic
/// order).
pub fn validate_clusters(
    assignment: &ClusterAssignment,
    ds: &Dataset,
    k_subset: usize,
    window: (u32, u32),
    cfg: &HealthConfig,
) -> Result<ValidationReport, HealthError> {
    let means = WindowMeans::compute(ds, window)?;
    let n = assignment.labels.len();

    // Adjacency over qubits with coupler data.
    let mut adj = vec![Vec::new(); n];
    for (&(a, b), _) in &means.f2q {
        if (a as usize) < n && (b as usize) < n {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
    }

    let mut per_cluster = Vec::new();
    let mut skipped = Vec::new();
    for (cluster, members) in assignment.members().iter().enumerate() {
        if members.len() < k_subset {
            skipped.push((
                cluster,
                format!("{} qubits, need {}", members.len(), k_subset),
            ));
            continue;
        }
        // Restrict adjacency to the cluster.
        let member_set: std::collections::BTreeSet<u32> =
            members.iter().map(|&m| m as u32).collect();
        let sub_adj: Vec<Vec<u32>> = (0..n as u32)
            .map(|q| {
                if member_set.contains(&q) {
                    adj[q as usize]
                        .iter()
                        .copied()
                        .filter(|u| member_set.contains(u))
                        .collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        let subsets: Vec<Vec<u32>> = connected_subsets(&sub_adj, k_subset)
            .into_iter()
            .filter(|s| s.iter().all(|q| member_set.contains(q)))
            .take(VALIDATE_SUBSET_CAP)
            .collect();
        let scores: Vec<f64> = subsets
            .par_iter()
            .filter_map(|s| best_chain(s, &means, cfg).map(|(_, score)| score))
            .collect();
        if scores.is_empty() {
            skipped.push((cluster, "no connected subsets with a chain".to_string()));
            continue;
        }
        let nf = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / nf;
        let std = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / nf).sqrt();
        per_cluster.push(ClusterGhzStats {
            cluster,
            n_qubits: members.len(),
            n_subsets: scores.len(),
            mean,
            std,
        });
    }

    let gap = if per_cluster.len() >= 2 {
        let max = per_cluster.iter().map(|c| c.mean).fold(f64::NEG_INFINITY, f64::max);
        let min = per_cluster.iter().map(|c| c.mean).fold(f64::INFINITY, f64::min);
        Some(max - min)
    } else {
        None
    };
    Ok(ValidationReport {
        k_subset,
        per_cluster,
        skipped,
        gap,
    })
}
