//! Unsupervised clustering of qubit feature vectors with silhouette-based
//! model selection and partition agreement scoring.
//!
//! Three algorithms share one assignment type: Lloyd's k-means with
//! k-means++ seeding and best-of-10 restarts, full-covariance Gaussian
//! mixture EM initialized from k-means, and spectral clustering on the
//! symmetric normalized Laplacian of a Gaussian affinity. k is chosen by
//! maximizing the silhouette score, ties going to the smaller k.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dist, dist2, jacobi_eigen, Cholesky, LinalgError, SymMatrix};
use crate::seed;
use rand::Rng;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("k = {k} invalid for {n} points (need 2 <= k <= n)")]
    BadK { k: usize, n: usize },
    #[error("no points supplied")]
    NoPoints,
    #[error("points have mismatched dimensions")]
    DimMismatch,
    #[error("kernel width must be positive, got {0}")]
    BadSigma(f64),
    #[error("silhouette needs at least 2 clusters")]
    SingleCluster,
    #[error("labels length {0} does not match points {1}")]
    LabelMismatch(usize, usize),
    #[error("covariance stayed singular after regularization")]
    SingularCovariance,
    #[error("affinity graph splits into {components} components; cannot form {k} clusters")]
    TooManyClustersForComponents { components: usize, k: usize },
    #[error("empty k range")]
    EmptyKRange,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Clustering algorithm selector. `Node2VecKMeans` is k-means on features
/// that include the graph embedding; it shares the k-means implementation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClusterMethod {
    KMeans,
    Gmm,
    Spectral,
    Node2VecKMeans,
}

impl ClusterMethod {
    pub const ALL: [ClusterMethod; 4] = [
        ClusterMethod::KMeans,
        ClusterMethod::Gmm,
        ClusterMethod::Spectral,
        ClusterMethod::Node2VecKMeans,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ClusterMethod::KMeans => "kmeans",
            ClusterMethod::Gmm => "gmm",
            ClusterMethod::Spectral => "spectral",
            ClusterMethod::Node2VecKMeans => "node2vec-kmeans",
        }
    }
}

impl std::str::FromStr for ClusterMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kmeans" => Ok(ClusterMethod::KMeans),
            "gmm" => Ok(ClusterMethod::Gmm),
            "spectral" => Ok(ClusterMethod::Spectral),
            "node2vec-kmeans" => Ok(ClusterMethod::Node2VecKMeans),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

/// Per-point labels with the method, k, and silhouette that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub method: ClusterMethod,
    pub k: usize,
    pub labels: Vec<usize>,
    pub silhouette: f64,
    pub seed: u64,
}

impl ClusterAssignment {
    /// Wrap externally supplied labels, recomputing the silhouette.
    pub fn from_labels(
        points: &[Vec<f64>],
        labels: Vec<usize>,
        method: ClusterMethod,
        seed: u64,
    ) -> Result<Self, ClusterError> {
        if labels.len() != points.len() {
            return Err(ClusterError::LabelMismatch(labels.len(), points.len()));
        }
        let k = labels.iter().copied().max().map_or(0, |m| m + 1);
        let silhouette = silhouette_score(points, &labels)?;
        Ok(ClusterAssignment {
            method,
            k,
            labels,
            silhouette,
            seed,
        })
    }

    /// Cluster membership lists, by label.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

fn check_points(points: &[Vec<f64>], k: usize) -> Result<usize, ClusterError> {
    if points.is_empty() {
        return Err(ClusterError::NoPoints);
    }
    let dims = points[0].len();
    if points.iter().any(|p| p.len() != dims) {
        return Err(ClusterError::DimMismatch);
    }
    if k < 2 || k > points.len() {
        return Err(ClusterError::BadK {
            k,
            n: points.len(),
        });
    }
    Ok(dims)
}

/// Number of independent k-means restarts.
pub const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITERS: usize = 300;

/// Lloyd's algorithm with k-means++ seeding, best of 10 restarts by
/// within-cluster sum of squares. Empty clusters are repaired by reseeding
/// at the point farthest from its assigned centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed_val: u64) -> Result<ClusterAssignment, ClusterError> {
    check_points(points, k)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..KMEANS_RESTARTS {
        let (labels, wcss) = kmeans_once(points, k, seed::mix(seed_val, &[0x6b6d, restart as u64]));
        if best.as_ref().is_none_or(|(b, _)| wcss < *b) {
            best = Some((wcss, labels));
        }
    }
    let (_, labels) = best.expect("at least one restart");
    let silhouette = silhouette_score(points, &labels)?;
    Ok(ClusterAssignment {
        method: ClusterMethod::KMeans,
        k,
        labels,
        silhouette,
        seed: seed_val,
    })
}

fn kmeans_once(points: &[Vec<f64>], k: usize, stream: u64) -> (Vec<usize>, f64) {
    let n = points.len();
    let mut rng = seed::rng(stream, &[]);

    // k-means++ seeding.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut draw = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                draw -= w;
                if draw < 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, centroids.last().unwrap()));
        }
    }

    let mut labels = vec![0usize; n];
    let mut prev_wcss = f64::INFINITY;
    for _ in 0..KMEANS_MAX_ITERS {
        // Assignment step; nearest centroid, lowest index on ties.
        let mut changed = false;
        let mut wcss = 0.0;
        for (i, p) in points.iter().enumerate() {
            let mut best_c = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = dist2(p, centroid);
                if d < best_d {
                    best_d = d;
                    best_c = c;
                }
            }
            wcss += best_d;
            if labels[i] != best_c {
                labels[i] = best_c;
                changed = true;
            }
        }
        debug_assert!(wcss <= prev_wcss + 1e-9, "WCSS increased: {prev_wcss} -> {wcss}");
        prev_wcss = wcss;

        // Update step with empty-cluster repair.
        let dims = points[0].len();
        let mut sums = vec![vec![0.0; dims]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Reseed at the point farthest from its assigned centroid.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        dist2(&points[a], &centroids[labels[a]])
                            .partial_cmp(&dist2(&points[b], &centroids[labels[b]]))
                            .expect("finite distances")
                    })
                    .expect("nonempty points");
                centroids[c] = points[far].clone();
                changed = true;
            } else {
                for (d, s) in centroids[c].iter_mut().zip(&sums[c]) {
                    *d = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let wcss: f64 = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| dist2(p, &centroids[l]))
        .sum();
    (labels, wcss)
}

const GMM_MAX_ITERS: usize = 500;
const GMM_TOL: f64 = 1e-7;
const GMM_REG: f64 = 1e-6;

/// EM on full-covariance Gaussians, k-means initialized, labels by maximum
/// posterior responsibility. The log-likelihood is non-decreasing across
/// iterations; EM stops when the gain drops below 1e-7.
pub fn gmm_em(points: &[Vec<f64>], k: usize, seed_val: u64) -> Result<ClusterAssignment, ClusterError> {
    let dims = check_points(points, k)?;
    let n = points.len();
    let init = kmeans(points, k, seed_val)?;

    let mut weights = vec![0.0f64; k];
    let mut means = vec![vec![0.0f64; dims]; k];
    let mut covs: Vec<SymMatrix> = Vec::with_capacity(k);
    // Initialize moments from the k-means partition.
    {
        let mut resp = vec![vec![0.0; k]; n];
        for (i, &l) in init.labels.iter().enumerate() {
            resp[i][l] = 1.0;
        }
        m_step(points, &resp, &mut weights, &mut means, &mut covs)?;
    }

    let mut resp = vec![vec![0.0; k]; n];
    let mut last_ll = f64::NEG_INFINITY;
    let mut chols: Vec<Cholesky> = covs.iter().map(Cholesky::new).collect::<Result<_, _>>()
        .map_err(|_| ClusterError::SingularCovariance)?;
    for _ in 0..GMM_MAX_ITERS {
        // E step in log space.
        let mut ll = 0.0;
        for (i, p) in points.iter().enumerate() {
            let logp: Vec<f64> = (0..k)
                .map(|c| weights[c].ln() + gaussian_logpdf(p, &means[c], &chols[c], dims))
                .collect();
            let m = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = logp.iter().map(|&v| (v - m).exp()).sum();
            let log_norm = m + sum_exp.ln();
            ll += log_norm;
            for c in 0..k {
                resp[i][c] = (logp[c] - log_norm).exp();
            }
        }
        debug_assert!(
            ll >= last_ll - 1e-8 * (1.0 + ll.abs()),
            "log-likelihood decreased: {last_ll} -> {ll}"
        );
        let gain = ll - last_ll;
        last_ll = ll;

        m_step(points, &resp, &mut weights, &mut means, &mut covs)?;
        chols = covs
            .iter()
            .map(Cholesky::new)
            .collect::<Result<_, _>>()
            .map_err(|_| ClusterError::SingularCovariance)?;

        if gain.abs() < GMM_TOL {
            break;
        }
    }

    let labels: Vec<usize> = resp
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite responsibility"))
                .map(|(c, _)| c)
                .expect("k > 0")
        })
        .collect();
    let labels = repair_empty_labels(points, labels, k);
    let silhouette = silhouette_score(points, &labels)?;
    Ok(ClusterAssignment {
        method: ClusterMethod::Gmm,
        k,
        labels,
        silhouette,
        seed: seed_val,
    })
}

fn m_step(
    points: &[Vec<f64>],
    resp: &[Vec<f64>],
    weights: &mut [f64],
    means: &mut [Vec<f64>],
    covs: &mut Vec<SymMatrix>,
) -> Result<(), ClusterError> {
    let n = points.len();
    let k = weights.len();
    let dims = points[0].len();
    covs.clear();
    for c in 0..k {
        let nk: f64 = resp.iter().map(|r| r[c]).sum();
        let nk_safe = nk.max(1e-12);
        weights[c] = (nk / n as f64).max(1e-12);
        for d in 0..dims {
            means[c][d] = resp
                .iter()
                .zip(points)
                .map(|(r, p)| r[c] * p[d])
                .sum::<f64>()
                / nk_safe;
        }
        let mut cov = SymMatrix::zeros(dims);
        for (r, p) in resp.iter().zip(points) {
            if r[c] == 0.0 {
                continue;
            }
            for a in 0..dims {
                let da = p[a] - means[c][a];
                for b in a..dims {
                    let db = p[b] - means[c][b];
                    cov.data[a * dims + b] += r[c] * da * db;
                }
            }
        }
        for a in 0..dims {
            for b in 0..a {
                cov.data[a * dims + b] = cov.data[b * dims + a];
            }
        }
        for v in cov.data.iter_mut() {
            *v /= nk_safe;
        }
        cov.add_diagonal(GMM_REG);
        covs.push(cov);
    }
    Ok(())
}

fn gaussian_logpdf(x: &[f64], mean: &[f64], chol: &Cholesky, dims: usize) -> f64 {
    let diff: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let sol = chol.solve(&diff);
    let maha: f64 = diff.iter().zip(&sol).map(|(a, b)| a * b).sum();
    -0.5 * (dims as f64 * (2.0 * std::f64::consts::PI).ln() + chol.log_det() + maha)
}

/// Reassign the nearest points to any empty label so every cluster in the
/// final assignment is nonempty.
fn repair_empty_labels(points: &[Vec<f64>], mut labels: Vec<usize>, k: usize) -> Vec<usize> {
    for c in 0..k {
        if !labels.contains(&c) {
            // Move the point farthest from its cluster's centroid into c.
            let centroid_of = |label: usize, labels: &[usize]| -> Vec<f64> {
                let members: Vec<&Vec<f64>> = points
                    .iter()
                    .zip(labels)
                    .filter(|(_, &l)| l == label)
                    .map(|(p, _)| p)
                    .collect();
                let dims = points[0].len();
                let mut c = vec![0.0; dims];
                for m in &members {
                    for (a, b) in c.iter_mut().zip(m.iter()) {
                        *a += b;
                    }
                }
                for a in c.iter_mut() {
                    *a /= members.len().max(1) as f64;
                }
                c
            };
            let far = (0..points.len())
                .max_by(|&a, &b| {
                    let ca = centroid_of(labels[a], &labels);
                    let cb = centroid_of(labels[b], &labels);
                    dist2(&points[a], &ca)
                        .partial_cmp(&dist2(&points[b], &cb))
                        .expect("finite")
                })
                .expect("nonempty");
            labels[far] = c;
        }
    }
    labels
}

/// Machine-precision affinity threshold for connectivity checks.
const AFFINITY_EPS: f64 = 1e-15;

/// Spectral clustering on the symmetric normalized Laplacian.
///
/// Gaussian affinity exp(-d²/2σ²), L = I - D^{-1/2} A D^{-1/2},
/// bottom-k eigenvectors by Jacobi rotation, row-normalized, then k-means on
/// the spectral coordinates. If the affinity graph is disconnected at
/// machine precision the connected components are clustered directly.
pub fn spectral(
    points: &[Vec<f64>],
    k: usize,
    sigma: f64,
    seed_val: u64,
) -> Result<ClusterAssignment, ClusterError> {
    check_points(points, k)?;
    if !(sigma > 0.0) {
        return Err(ClusterError::BadSigma(sigma));
    }
    let n = points.len();

    let mut affinity = SymMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let a = (-dist2(&points[i], &points[j]) / (2.0 * sigma * sigma)).exp();
            affinity.set(i, j, a);
        }
    }

    // Disconnected affinity at machine precision: cluster components directly.
    let comp = components_by_affinity(&affinity, n);
    let n_comp = comp.iter().copied().max().unwrap_or(0) + 1;
    if n_comp > 1 {
        let labels = cluster_components(points, &comp, n_comp, k, seed_val)?;
        let silhouette = silhouette_score(points, &labels)?;
        return Ok(ClusterAssignment {
            method: ClusterMethod::Spectral,
            k,
            labels,
            silhouette,
            seed: seed_val,
        });
    }

    let mut degree = vec![0.0; n];
    for i in 0..n {
        degree[i] = (0..n).map(|j| affinity.get(i, j)).sum();
    }
    let mut laplacian = SymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let norm = affinity.get(i, j) / (degree[i] * degree[j]).sqrt();
            laplacian.data[i * n + j] = if i == j { 1.0 - norm } else { -norm };
        }
    }
    // Exact symmetry for the eigensolver.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (laplacian.get(i, j) + laplacian.get(j, i));
            laplacian.set(i, j, v);
        }
    }

    let (_, vectors) = jacobi_eigen(&laplacian)?;
    // Rows of the spectral embedding: entry e of eigenvector v per point.
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..k).map(|e| vectors[e][i]).collect())
        .collect();
    for row in rows.iter_mut() {
        let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
    }

    let km = kmeans(&rows, k, seed_val)?;
    let silhouette = silhouette_score(points, &km.labels)?;
    Ok(ClusterAssignment {
        method: ClusterMethod::Spectral,
        k,
        labels: km.labels,
        silhouette,
        seed: seed_val,
    })
}

fn components_by_affinity(affinity: &SymMatrix, n: usize) -> Vec<usize> {
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = next;
        while let Some(v) = stack.pop() {
            for w in 0..n {
                if comp[w] == usize::MAX && affinity.get(v, w) > AFFINITY_EPS {
                    comp[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Group whole components into k clusters by k-means on component-indicator
/// coordinates; splitting a machine-precision-disconnected component is not
/// meaningful.
fn cluster_components(
    points: &[Vec<f64>],
    comp: &[usize],
    n_comp: usize,
    k: usize,
    seed_val: u64,
) -> Result<Vec<usize>, ClusterError> {
    if k > n_comp {
        return Err(ClusterError::TooManyClustersForComponents {
            components: n_comp,
            k,
        });
    }
    if k == n_comp {
        return Ok(comp.to_vec());
    }
    // Merge components: k-means over component centroids, weighted by size
    // through repetition of member points.
    let dims = points[0].len();
    let mut centroids = vec![vec![0.0; dims]; n_comp];
    let mut counts = vec![0usize; n_comp];
    for (p, &c) in points.iter().zip(comp) {
        counts[c] += 1;
        for (a, b) in centroids[c].iter_mut().zip(p) {
            *a += b;
        }
    }
    for (c, count) in counts.iter().enumerate() {
        for a in centroids[c].iter_mut() {
            *a /= *count as f64;
        }
    }
    let km = kmeans(&centroids, k, seed_val)?;
    Ok(comp.iter().map(|&c| km.labels[c]).collect())
}

/// Median pairwise distance; the default spectral kernel width.
pub fn median_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            d.push(dist(&points[i], &points[j]));
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let m = d.len();
    if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    }
}

/// Mean silhouette over all points: (b - a)/max(a, b) with a the mean
/// intra-cluster distance (self excluded) and b the smallest mean distance
/// to another cluster. Points in singleton clusters contribute 0.
pub fn silhouette_score(points: &[Vec<f64>], labels: &[usize]) -> Result<f64, ClusterError> {
    if labels.len() != points.len() {
        return Err(ClusterError::LabelMismatch(labels.len(), points.len()));
    }
    if points.is_empty() {
        return Err(ClusterError::NoPoints);
    }
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(ClusterError::SingleCluster);
    }

    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        if sizes[labels[i]] == 1 {
            continue; // contributes 0
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += dist(&points[i], &points[j]);
            }
        }
        let a = sums[labels[i]] / (sizes[labels[i]] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != labels[i] && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Run the chosen method over every k in the range and keep the assignment
/// with the highest silhouette; ties break toward smaller k. `sigma` feeds
/// the spectral method only; pass `None` for the median-distance default.
pub fn select_k(
    points: &[Vec<f64>],
    method: ClusterMethod,
    k_range: std::ops::RangeInclusive<usize>,
    sigma: Option<f64>,
    seed_val: u64,
) -> Result<ClusterAssignment, ClusterError> {
    let mut best: Option<ClusterAssignment> = None;
    let mut tried = false;
    for k in k_range {
        tried = true;
        let assignment = run_method(points, method, k, sigma, seed_val)?;
        if best
            .as_ref()
            .is_none_or(|b| assignment.silhouette > b.silhouette)
        {
            best = Some(assignment);
        }
    }
    if !tried {
        return Err(ClusterError::EmptyKRange);
    }
    Ok(best.expect("nonempty range"))
}

/// Dispatch one method at one k.
pub fn run_method(
    points: &[Vec<f64>],
    method: ClusterMethod,
    k: usize,
    sigma: Option<f64>,
    seed_val: u64,
) -> Result<ClusterAssignment, ClusterError> {
    match method {
        ClusterMethod::KMeans => kmeans(points, k, seed_val),
        ClusterMethod::Node2VecKMeans => {
            let mut a = kmeans(points, k, seed_val)?;
            a.method = ClusterMethod::Node2VecKMeans;
            Ok(a)
        }
        ClusterMethod::Gmm => gmm_em(points, k, seed_val),
        ClusterMethod::Spectral => {
            let s = sigma.unwrap_or_else(|| median_pairwise_distance(points));
            spectral(points, k, s, seed_val)
        }
    }
}

/// Permutation-model adjusted Rand index between two labelings.
///
/// 1 for identical partitions; 0 in expectation under chance, including the
/// degenerate constant-labeling cases.
pub fn adjusted_rand_index(labels_a: &[usize], labels_b: &[usize]) -> Result<f64, ClusterError> {
    if labels_a.len() != labels_b.len() {
        return Err(ClusterError::LabelMismatch(labels_a.len(), labels_b.len()));
    }
    let n = labels_a.len();
    let ka = labels_a.iter().copied().max().map_or(0, |m| m + 1);
    let kb = labels_b.iter().copied().max().map_or(0, |m| m + 1);
    let mut table = vec![0u64; ka * kb];
    let mut rows = vec![0u64; ka];
    let mut cols = vec![0u64; kb];
    for (&a, &b) in labels_a.iter().zip(labels_b) {
        table[a * kb + b] += 1;
        rows[a] += 1;
        cols[b] += 1;
    }
    let c2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_cells: f64 = table.iter().map(|&x| c2(x)).sum();
    let sum_rows: f64 = rows.iter().map(|&x| c2(x)).sum();
    let sum_cols: f64 = cols.iter().map(|&x| c2(x)).sum();
    let total = c2(n as u64);
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom.abs() < 1e-12 {
        // Degenerate partitions: identical ones agree perfectly, anything
        // else carries no information beyond chance.
        let same = sum_cells == sum_rows && sum_cells == sum_cols;
        return Ok(if same && sum_rows == sum_cols { 1.0 } else { 0.0 });
    }
    Ok((sum_cells - expected) / denom)
}
