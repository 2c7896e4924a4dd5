//! Device connectivity graph and node embedding.
//!
//! Qubit topology vectors come from second-order biased random walks over the
//! coupler graph followed by skip-gram training with negative sampling.
//! Walks from the edge (t -> v) weight each candidate x by 1/p if x = t, by 1
//! if x is adjacent to t, and by 1/q otherwise, so p tunes backtracking and q
//! tunes outward exploration. Combined with standardized per-metric window
//! means this yields one feature vector per qubit for clustering.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::caldata::{CalDataError, Dataset, MetricKind, TargetId};
use crate::seed;

/// Qubit nodes and coupler edges of a QPU connectivity graph.
///
/// Simple undirected graph: no self-loops, no duplicate edges, endpoints
/// stored ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceTopology {
    pub name: String,
    pub n_qubits: u32,
    pub edges: Vec<(u32, u32)>,
}

/// Errors from topology validation and embedding.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("self-loop at node {0}")]
    SelfLoop(u32),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(u32, u32),
    #[error("node index {0} out of range for {1} qubits")]
    NodeOutOfRange(u32, u32),
    #[error("invalid walk parameter: {0}")]
    BadParameter(String),
    #[error("node {0} appears in no walk")]
    NodeNotCovered(u32),
    #[error("no walks supplied")]
    EmptyWalks,
    #[error("qubit {qubit} has no {metric} data in the window")]
    MissingMetric { qubit: u32, metric: MetricKind },
    #[error("feature column {0} has zero variance across qubits")]
    ConstantFeature(usize),
    #[error(transparent)]
    CalData(#[from] CalDataError),
}

impl DeviceTopology {
    /// Build and validate a topology from an edge list.
    pub fn new(
        name: impl Into<String>,
        n_qubits: u32,
        edges: Vec<(u32, u32)>,
    ) -> Result<Self, GraphError> {
        let mut seen = BTreeSet::new();
        let mut normalized = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            for n in [a, b] {
                if n >= n_qubits {
                    return Err(GraphError::NodeOutOfRange(n, n_qubits));
                }
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(GraphError::DuplicateEdge(e.0, e.1));
            }
            normalized.push(e);
        }
        normalized.sort_unstable();
        Ok(DeviceTopology {
            name: name.into(),
            n_qubits,
            edges: normalized,
        })
    }

    /// Load and validate a topology JSON file.
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, GraphError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let raw: DeviceTopology = serde_json::from_str(text)?;
        DeviceTopology::new(raw.name, raw.n_qubits, raw.edges)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("topology serializes");
        s.push('\n');
        s
    }

    /// The 20-qubit, 30-coupler grid topology bundled with the crate.
    pub fn default_device() -> Self {
        Self::from_json(DEFAULT_TOPOLOGY_JSON).expect("bundled topology is valid")
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        let e = (a.min(b), a.max(b));
        self.edges.binary_search(&e).is_ok()
    }

    /// Neighbor lists indexed by node, neighbors ascending.
    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.n_qubits as usize];
        for &(a, b) in &self.edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// BFS connectivity over all nodes.
    pub fn is_connected(&self) -> bool {
        if self.n_qubits == 0 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.n_qubits as usize];
        let mut queue = vec![0u32];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop() {
            for &w in &adj[v as usize] {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    count += 1;
                    queue.push(w);
                }
            }
        }
        count == self.n_qubits
    }

    /// Edges of the subgraph induced by `nodes`.
    pub fn induced_edges(&self, nodes: &[u32]) -> Vec<(u32, u32)> {
        let set: BTreeSet<u32> = nodes.iter().copied().collect();
        self.edges
            .iter()
            .filter(|(a, b)| set.contains(a) && set.contains(b))
            .copied()
            .collect()
    }
}

/// Bundled default topology as JSON text.
pub const DEFAULT_TOPOLOGY_JSON: &str = include_str!("../data/topology_default.json");

/// Hyperparameters for walk generation and skip-gram training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedParams {
    pub p: f64,
    pub q: f64,
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub dims: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for EmbedParams {
    fn default() -> Self {
        EmbedParams {
            p: 1.0,
            q: 1.0,
            walk_length: 20,
            walks_per_node: 50,
            dims: 8,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

/// Per-node embedding vectors plus the hyperparameters that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub dims: usize,
    pub vectors: Vec<Vec<f64>>,
    pub hyperparams: EmbedParams,
}

impl Embedding {
    /// Placeholder embedding with zero dimensions (metric-only features).
    pub fn empty(n_nodes: usize) -> Self {
        Embedding {
            dims: 0,
            vectors: vec![Vec::new(); n_nodes],
            hyperparams: EmbedParams {
                dims: 0,
                epochs: 0,
                ..EmbedParams::default()
            },
        }
    }

    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        let (va, vb) = (&self.vectors[a], &self.vectors[b]);
        let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
        let na: f64 = va.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    }

    /// Export as CSV (`node,v0,...,v{d-1}`).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node");
        for d in 0..self.dims {
            out.push_str(&format!(",v{d}"));
        }
        out.push('\n');
        for (node, vec) in self.vectors.iter().enumerate() {
            out.push_str(&node.to_string());
            for v in vec {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Generate second-order biased random walks from every node.
///
/// Walks are deterministic given the seed: each (start, repeat) pair draws
/// from its own substream, so generation order does not matter.
pub fn node2vec_walks(
    g: &DeviceTopology,
    p: f64,
    q: f64,
    walk_length: usize,
    walks_per_node: usize,
    base_seed: u64,
) -> Result<Vec<Vec<u32>>, GraphError> {
    if !(p > 0.0) || !(q > 0.0) {
        return Err(GraphError::BadParameter(format!("p={p}, q={q}")));
    }
    if walk_length < 2 {
        return Err(GraphError::BadParameter(format!(
            "walk_length={walk_length}"
        )));
    }
    let adj = g.adjacency();
    let mut walks = Vec::with_capacity(g.n_qubits as usize * walks_per_node);
    for start in 0..g.n_qubits {
        for rep in 0..walks_per_node {
            let mut rng = seed::rng(base_seed, &[0x77a1, start as u64, rep as u64]);
            walks.push(walk_from(&adj, start, p, q, walk_length, &mut rng));
        }
    }
    Ok(walks)
}

/// One biased walk; isolated start nodes yield a single-node walk.
fn walk_from<R: Rng>(
    adj: &[Vec<u32>],
    start: u32,
    p: f64,
    q: f64,
    walk_length: usize,
    rng: &mut R,
) -> Vec<u32> {
    let mut walk = Vec::with_capacity(walk_length);
    walk.push(start);
    if adj[start as usize].is_empty() {
        return walk;
    }
    // First step is an unbiased neighbor choice.
    let first = &adj[start as usize];
    let next = first[rng.random_range(0..first.len())];
    walk.push(next);
    while walk.len() < walk_length {
        let prev = walk[walk.len() - 2];
        let cur = walk[walk.len() - 1];
        let candidates = &adj[cur as usize];
        let mut weights = Vec::with_capacity(candidates.len());
        let mut total = 0.0;
        for &x in candidates {
            let w = if x == prev {
                1.0 / p
            } else if adj[prev as usize].binary_search(&x).is_ok() {
                1.0
            } else {
                1.0 / q
            };
            total += w;
            weights.push(w);
        }
        let mut draw = rng.random::<f64>() * total;
        let mut chosen = candidates[candidates.len() - 1];
        for (i, &w) in weights.iter().enumerate() {
            draw -= w;
            if draw < 0.0 {
                chosen = candidates[i];
                break;
            }
        }
        walk.push(chosen);
    }
    walk
}

/// Train skip-gram with negative sampling over the walks.
///
/// The objective follows word2vec: maximize log-sigmoid score of observed
/// (center, context) pairs within `window`, minus `negatives` samples from
/// the unigram^(3/4) node distribution. Single-threaded and deterministic
/// given the seed; `epochs = 0` returns the seeded random initialization.
pub fn train_skipgram(
    walks: &[Vec<u32>],
    n_nodes: usize,
    params: &EmbedParams,
) -> Result<Embedding, GraphError> {
    if walks.is_empty() {
        return Err(GraphError::EmptyWalks);
    }
    let mut counts = vec![0u64; n_nodes];
    for w in walks {
        for &v in w {
            counts[v as usize] += 1;
        }
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(GraphError::NodeNotCovered(missing as u32));
    }

    let dims = params.dims;
    let mut rng = seed::rng(params.seed, &[0x5639]);
    let scale = if dims > 0 { 0.5 / dims as f64 } else { 0.0 };
    let mut vin: Vec<f64> = (0..n_nodes * dims)
        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale)
        .collect();
    let mut vout = vec![0.0f64; n_nodes * dims];

    // Cumulative unigram^(3/4) table for negative sampling.
    let pow_counts: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
    let cum: Vec<f64> = pow_counts
        .iter()
        .scan(0.0, |acc, &w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let cum_total = *cum.last().unwrap();
    let sample_negative = |rng: &mut rand_chacha::ChaCha8Rng| -> usize {
        let x = rng.random::<f64>() * cum_total;
        cum.partition_point(|&c| c <= x).min(n_nodes - 1)
    };

    let total_pairs: u64 = {
        let per_walk: u64 = walks
            .iter()
            .map(|w| (w.len() as u64) * 2 * params.window as u64)
            .sum();
        (per_walk * params.epochs as u64).max(1)
    };
    let mut processed = 0u64;

    for epoch in 0..params.epochs {
        let mut train_rng = seed::rng(params.seed, &[0x7e21, epoch as u64]);
        for walk in walks {
            for (i, &center) in walk.iter().enumerate() {
                let lo = i.saturating_sub(params.window);
                let hi = (i + params.window).min(walk.len() - 1);
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    processed += 1;
                    let lr = params.learning_rate
                        * (1.0 - processed as f64 / total_pairs as f64).max(1e-4);
                    let context = walk[j] as usize;
                    let c = center as usize;
                    // Positive update then negative samples.
                    sgns_update(&mut vin, &mut vout, dims, c, context, 1.0, lr);
                    for _ in 0..params.negatives {
                        let neg = sample_negative(&mut train_rng);
                        if neg == context {
                            continue;
                        }
                        sgns_update(&mut vin, &mut vout, dims, c, neg, 0.0, lr);
                    }
                }
            }
        }
    }

    let vectors = (0..n_nodes)
        .map(|n| vin[n * dims..(n + 1) * dims].to_vec())
        .collect();
    Ok(Embedding {
        dims,
        vectors,
        hyperparams: *params,
    })
}

fn sgns_update(
    vin: &mut [f64],
    vout: &mut [f64],
    dims: usize,
    center: usize,
    other: usize,
    label: f64,
    lr: f64,
) {
    let (ci, oi) = (center * dims, other * dims);
    let mut dot = 0.0;
    for d in 0..dims {
        dot += vin[ci + d] * vout[oi + d];
    }
    let pred = 1.0 / (1.0 + (-dot).exp());
    let g = lr * (label - pred);
    for d in 0..dims {
        let (iv, ov) = (vin[ci + d], vout[oi + d]);
        vin[ci + d] = iv + g * ov;
        vout[oi + d] = ov + g * iv;
    }
}

/// Convenience wrapper: walks plus training with one parameter set.
pub fn embed(g: &DeviceTopology, params: &EmbedParams) -> Result<Embedding, GraphError> {
    if params.dims == 0 {
        return Ok(Embedding::empty(g.n_qubits as usize));
    }
    let walks = node2vec_walks(
        g,
        params.p,
        params.q,
        params.walk_length,
        params.walks_per_node,
        params.seed,
    )?;
    train_skipgram(&walks, g.n_qubits as usize, params)
}

/// Metric order used in the per-qubit feature vector.
pub const FEATURE_METRICS: [MetricKind; 6] = [
    MetricKind::T1,
    MetricKind::T2Star,
    MetricKind::T2Echo,
    MetricKind::ReadoutFidelity,
    MetricKind::Fidelity1Q,
    MetricKind::Fidelity2Q,
];

/// Per-qubit feature vectors: standardized metric window means concatenated
/// with the embedding vector.
///
/// The two-qubit fidelity is folded to qubits as the mean over incident
/// couplers. Every feature column (including embedding dimensions) is
/// standardized to zero mean and unit variance across qubits. Returns one
/// row per qubit index `0..n`, where `n` is the embedding's node count.
pub fn qubit_features(
    ds: &Dataset,
    emb: &Embedding,
    window: (u32, u32),
) -> Result<Vec<Vec<f64>>, GraphError> {
    let n = emb.vectors.len();
    let (from, to) = window;
    let mut rows: Vec<Vec<f64>> = vec![Vec::with_capacity(6 + emb.dims); n];

    let window_mean = |target: TargetId, metric: MetricKind| -> Option<f64> {
        let s = ds.series(target, metric).window(from, to);
        if s.is_empty() {
            None
        } else {
            Some(s.values().iter().sum::<f64>() / s.len() as f64)
        }
    };

    let couplers = ds.couplers();
    for q in 0..n as u32 {
        for metric in FEATURE_METRICS {
            let value = if metric == MetricKind::Fidelity2Q {
                let incident: Vec<f64> = couplers
                    .iter()
                    .filter(|c| c.qubits().contains(&q))
                    .filter_map(|&c| window_mean(c, metric))
                    .collect();
                if incident.is_empty() {
                    None
                } else {
                    Some(incident.iter().sum::<f64>() / incident.len() as f64)
                }
            } else {
                window_mean(TargetId::Qubit(q), metric)
            };
            let value = value.ok_or(GraphError::MissingMetric { qubit: q, metric })?;
            rows[q as usize].push(value);
        }
        rows[q as usize].extend_from_slice(&emb.vectors[q as usize]);
    }

    // Standardize each column across qubits.
    let cols = 6 + emb.dims;
    for c in 0..cols {
        let mean = rows.iter().map(|r| r[c]).sum::<f64>() / n as f64;
        let var = rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n as f64;
        if var == 0.0 {
            return Err(GraphError::ConstantFeature(c));
        }
        let sd = var.sqrt();
        for r in rows.iter_mut() {
            r[c] = (r[c] - mean) / sd;
        }
    }
    Ok(rows)
}
