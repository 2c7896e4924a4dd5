//! Subcommand implementations: load inputs, call the library, write files.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use qhealth::caldata::{CalDataError, Dataset, MetricKind, TargetId};
use qhealth::cluster::{
    adjusted_rand_index, run_method, select_k, ClusterAssignment, ClusterError, ClusterMethod,
};
use qhealth::fitkit::{fit_exp_decay, fit_ramsey, fit_rb_decay, FitError, FitResult};
use qhealth::graphembed::{embed, qubit_features, DeviceTopology, EmbedParams, GraphError};
use qhealth::health::{
    health_scores, recalibration_advice, recommend_subsets, validate_clusters, HealthConfig,
    HealthError, SearchMode,
};
use qhealth::synthdev::{default_scenario, generate_corpus, DeviceScenario, SynthError};
use qhealth::tempstats::{self, StatsError};
use qhealth::xcorr::{metric_correlation_matrix, CorrMethod, XcorrError};

/// Command failure with its exit class.
#[derive(Debug)]
pub enum CmdError {
    Usage(String),
    Data(String),
    Numeric(String),
    Io(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Usage(_) => 2,
            CmdError::Data(_) | CmdError::Io(_) => 3,
            CmdError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Usage(m) => write!(f, "error: usage: {m}"),
            CmdError::Data(m) => write!(f, "error: data-validation: {m}"),
            CmdError::Numeric(m) => write!(f, "error: numerical: {m}"),
            CmdError::Io(m) => write!(f, "error: io: {m}"),
        }
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Io(e.to_string())
    }
}

impl From<CalDataError> for CmdError {
    fn from(e: CalDataError) -> Self {
        CmdError::Data(e.to_string())
    }
}

impl From<SynthError> for CmdError {
    fn from(e: SynthError) -> Self {
        CmdError::Data(e.to_string())
    }
}

impl From<GraphError> for CmdError {
    fn from(e: GraphError) -> Self {
        CmdError::Data(e.to_string())
    }
}

impl From<StatsError> for CmdError {
    fn from(e: StatsError) -> Self {
        CmdError::Numeric(e.to_string())
    }
}

impl From<XcorrError> for CmdError {
    fn from(e: XcorrError) -> Self {
        match e {
            XcorrError::InsufficientWindow { .. } | XcorrError::CalData(_) => {
                CmdError::Data(e.to_string())
            }
            other => CmdError::Numeric(other.to_string()),
        }
    }
}

impl From<ClusterError> for CmdError {
    fn from(e: ClusterError) -> Self {
        CmdError::Numeric(e.to_string())
    }
}

impl From<FitError> for CmdError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::TooFewPoints { .. }
            | FitError::NonIncreasingX
            | FitError::ProbabilityOutOfRange(_)
            | FitError::OutOfDomain { .. } => CmdError::Data(e.to_string()),
            other => CmdError::Numeric(other.to_string()),
        }
    }
}

impl From<HealthError> for CmdError {
    fn from(e: HealthError) -> Self {
        match e {
            HealthError::Stats(inner) => CmdError::Numeric(inner.to_string()),
            other => CmdError::Data(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CmdError {
    fn from(e: serde_json::Error) -> Self {
        CmdError::Data(e.to_string())
    }
}

fn parse_window(spec: &str) -> Result<(u32, u32), CmdError> {
    let (a, b) = spec
        .split_once(':')
        .ok_or_else(|| CmdError::Usage(format!("window must be FROM:TO, got {spec:?}")))?;
    let from: u32 = a
        .parse()
        .map_err(|_| CmdError::Usage(format!("bad window start {a:?}")))?;
    let to: u32 = b
        .parse()
        .map_err(|_| CmdError::Usage(format!("bad window end {b:?}")))?;
    if from > to {
        return Err(CmdError::Usage(format!("window start {from} after end {to}")));
    }
    Ok((from, to))
}

fn window_or_full(ds: &Dataset, window: Option<&str>) -> Result<(u32, u32), CmdError> {
    match window {
        Some(w) => parse_window(w),
        None => {
            let last = ds
                .last_day()
                .ok_or_else(|| CmdError::Data("dataset is empty".to_string()))?;
            Ok((0, last))
        }
    }
}

fn load_dataset(path: &Path) -> Result<Dataset, CmdError> {
    let ds = if path.extension().is_some_and(|e| e == "json") {
        Dataset::ingest_json(path)?
    } else {
        Dataset::ingest_csv(path)?
    };
    if ds.is_empty() {
        return Err(CmdError::Data(format!("{} contains no records", path.display())));
    }
    Ok(ds)
}

fn load_topology(path: Option<&Path>) -> Result<DeviceTopology, CmdError> {
    match path {
        Some(p) => Ok(DeviceTopology::load(p)?),
        None => Ok(DeviceTopology::default_device()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CmdError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn synth(
    use_default: bool,
    scenario_path: Option<&Path>,
    seed: u64,
    out: &Path,
) -> Result<(), CmdError> {
    let scenario: DeviceScenario = match (use_default, scenario_path) {
        (true, _) => default_scenario(seed),
        (false, Some(p)) => {
            let text = fs::read_to_string(p)?;
            DeviceScenario::from_json(&text)?
        }
        (false, None) => {
            return Err(CmdError::Usage(
                "provide --default or --scenario FILE".to_string(),
            ))
        }
    };
    fs::create_dir_all(out)?;
    let ds = generate_corpus(&scenario)?;
    ds.emit_csv(out.join("corpus.csv"))?;
    fs::write(out.join("scenario.json"), scenario.to_json()?)?;
    fs::write(out.join("topology.json"), scenario.topology.to_json())?;
    println!(
        "corpus: {} rows, {} qubits, {} couplers, {} days -> {}",
        ds.len(),
        scenario.n_qubits,
        scenario.topology.edges.len(),
        scenario.n_days,
        out.join("corpus.csv").display()
    );
    Ok(())
}

pub fn fit(model: &str, curve: &Path, out: Option<&Path>) -> Result<(), CmdError> {
    let text = fs::read_to_string(curve)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "x,y" => {}
        other => {
            return Err(CmdError::Data(format!(
                "curve file must start with header \"x,y\", got {other:?}"
            )))
        }
    }
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (x, y) = line.split_once(',').ok_or_else(|| {
            CmdError::Data(format!("line {}: expected x,y", i + 2))
        })?;
        xs.push(
            x.trim()
                .parse::<f64>()
                .map_err(|_| CmdError::Data(format!("line {}: bad x {x:?}", i + 2)))?,
        );
        ys.push(
            y.trim()
                .parse::<f64>()
                .map_err(|_| CmdError::Data(format!("line {}: bad y {y:?}", i + 2)))?,
        );
    }
    let result: FitResult = match model {
        "exp" => fit_exp_decay(&xs, &ys)?,
        "ramsey" => fit_ramsey(&xs, &ys)?,
        "rb" => fit_rb_decay(&xs, &ys)?,
        other => {
            return Err(CmdError::Usage(format!(
                "unknown model {other:?}; expected exp, ramsey, or rb"
            )))
        }
    };
    let mut text = serde_json::to_string_pretty(&result)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct MetricSummary {
    metric: MetricKind,
    pooled: tempstats::SummaryStats,
}

#[derive(Serialize)]
struct TargetSummary {
    target: TargetId,
    metric: MetricKind,
    stats: tempstats::SummaryStats,
}

pub fn stats(
    data: &Path,
    out: &Path,
    window: Option<&str>,
    max_lag: usize,
) -> Result<(), CmdError> {
    let full = load_dataset(data)?;
    let (from, to) = window_or_full(&full, window)?;
    fs::create_dir_all(out)?;

    let metrics_present: Vec<MetricKind> = MetricKind::ALL
        .into_iter()
        .filter(|&m| full.records().iter().any(|r| r.metric == m))
        .collect();

    // summary.json: pooled per metric plus per-target breakdowns.
    let mut pooled = Vec::new();
    let mut per_target = Vec::new();
    for &metric in &metrics_present {
        let values: Vec<f64> = full
            .records()
            .iter()
            .filter(|r| r.metric == metric && r.day >= from && r.day <= to)
            .map(|r| r.value)
            .collect();
        if values.len() >= 2 {
            pooled.push(MetricSummary {
                metric,
                pooled: tempstats::summary_values(&values)?,
            });
        }
        for target in full.targets() {
            if target.is_coupler() != metric.attaches_to_coupler() {
                continue;
            }
            let series = full.series(target, metric).window(from, to);
            if series.len() >= 2 {
                per_target.push(TargetSummary {
                    target,
                    metric,
                    stats: tempstats::summary(&series)?,
                });
            }
        }
    }
    #[derive(Serialize)]
    struct SummaryFile {
        window: (u32, u32),
        metrics: Vec<MetricSummary>,
        targets: Vec<TargetSummary>,
    }
    write_json(
        &out.join("summary.json"),
        &SummaryFile {
            window: (from, to),
            metrics: pooled,
            targets: per_target,
        },
    )?;

    // acf.csv: one row per (target, metric, lag); skip invalid series.
    let mut acf_csv = String::from("target,metric,lag,value,ci_halfwidth\n");
    for &metric in &metrics_present {
        for target in full.targets() {
            if target.is_coupler() != metric.attaches_to_coupler() {
                continue;
            }
            let series = full.series(target, metric).window(from, to);
            if let Ok(r) = tempstats::acf(&series, max_lag) {
                for (lag, v) in r.lags.iter().zip(&r.values) {
                    acf_csv.push_str(&format!(
                        "{target},{metric},{lag},{v},{}\n",
                        r.ci_halfwidth
                    ));
                }
            }
        }
    }
    fs::write(out.join("acf.csv"), acf_csv)?;

    // ranking.csv: instability ranking per metric.
    let mut ranking_csv = String::from("metric,rank,target,std\n");
    for &metric in &metrics_present {
        let windowed = Dataset::new(
            full.records()
                .iter()
                .filter(|r| r.day >= from && r.day <= to)
                .copied()
                .collect(),
        )?;
        for (i, (target, std)) in tempstats::instability_ranking(&windowed, metric)
            .into_iter()
            .enumerate()
        {
            ranking_csv.push_str(&format!("{metric},{},{target},{std}\n", i + 1));
        }
    }
    fs::write(out.join("ranking.csv"), ranking_csv)?;

    // hist.csv: pooled histogram per metric, Freedman-Diaconis bins.
    let mut hist_csv = String::from("metric,bin_lo,bin_hi,count,density\n");
    for &metric in &metrics_present {
        let values: Vec<f64> = full
            .records()
            .iter()
            .filter(|r| r.metric == metric && r.day >= from && r.day <= to)
            .map(|r| r.value)
            .collect();
        if values.is_empty() {
            continue;
        }
        let h = tempstats::histogram(&values, tempstats::fd_bin_count(&values))?;
        for (i, (&c, &d)) in h.counts.iter().zip(&h.normalized).enumerate() {
            hist_csv.push_str(&format!(
                "{metric},{},{},{c},{d}\n",
                h.edges[i],
                h.edges[i + 1]
            ));
        }
    }
    fs::write(out.join("hist.csv"), hist_csv)?;
    Ok(())
}

pub fn corr(data: &Path, method: &str, window: &str, out: &Path) -> Result<(), CmdError> {
    let ds = load_dataset(data)?;
    let window = parse_window(window)?;
    let methods: Vec<CorrMethod> = if method == "all" {
        CorrMethod::ALL.to_vec()
    } else {
        vec![method
            .parse()
            .map_err(|e: String| CmdError::Usage(e))?]
    };
    fs::create_dir_all(out)?;
    for m in methods {
        let matrix = metric_correlation_matrix(&ds, m, window)?;
        fs::write(out.join(format!("corr_{}.csv", m.code())), matrix.to_csv())?;
        write_json(&out.join(format!("corr_{}.json", m.code())), &matrix)?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct AssignmentOut {
    pub method: String,
    pub k: usize,
    pub silhouette: f64,
    pub labels: Vec<usize>,
    pub clusters: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
pub struct ClusterReport {
    pub seed: u64,
    pub window: (u32, u32),
    pub embedding_dims: usize,
    pub assignments: Vec<AssignmentOut>,
    /// Pairwise adjusted Rand index between methods, row-major over the
    /// assignment order.
    pub pairwise_ari: Vec<Vec<f64>>,
}

#[allow(clippy::too_many_arguments)]
pub fn cluster(
    data: &Path,
    topology: Option<&Path>,
    method: &str,
    k_spec: &str,
    seed: u64,
    window: Option<&str>,
    out: &Path,
) -> Result<(), CmdError> {
    let mut ds = load_dataset(data)?;
    let topo = load_topology(topology)?;
    ds.attach_topology(&topo)?;
    let window = window_or_full(&ds, window)?;

    let methods: Vec<ClusterMethod> = if method == "all" {
        ClusterMethod::ALL.to_vec()
    } else {
        vec![method
            .parse()
            .map_err(|e: String| CmdError::Usage(e))?]
    };

    let params = EmbedParams {
        seed,
        ..EmbedParams::default()
    };
    let embedding = embed(&topo, &params)?;
    let features = qubit_features(&ds, &embedding, window)?;
    let n = features.len();

    let k = match k_spec {
        "auto" => None,
        other => {
            let k: usize = other
                .parse()
                .map_err(|_| CmdError::Usage(format!("bad k {other:?}")))?;
            if k < 2 || k > n {
                return Err(CmdError::Usage(format!(
                    "k must be in 2..={n}, got {k}"
                )));
            }
            Some(k)
        }
    };

    let mut assignments: Vec<ClusterAssignment> = Vec::new();
    for m in &methods {
        let a = match k {
            Some(k) => run_method(&features, *m, k, None, seed)?,
            None => select_k(&features, *m, 2..=6.min(n - 1), None, seed)?,
        };
        assignments.push(a);
    }

    fs::create_dir_all(out)?;
    fs::write(out.join("embedding.csv"), embedding.to_csv())?;
    for a in &assignments {
        let name = if methods.len() == 1 {
            "labels.csv".to_string()
        } else {
            format!("labels_{}.csv", a.method.code())
        };
        let mut csv = String::from("qubit,label\n");
        for (q, l) in a.labels.iter().enumerate() {
            csv.push_str(&format!("{q},{l}\n"));
        }
        fs::write(out.join(name), csv)?;
    }

    let mut pairwise = vec![vec![1.0; assignments.len()]; assignments.len()];
    for i in 0..assignments.len() {
        for j in (i + 1)..assignments.len() {
            let ari = adjusted_rand_index(&assignments[i].labels, &assignments[j].labels)?;
            pairwise[i][j] = ari;
            pairwise[j][i] = ari;
        }
    }
    let report = ClusterReport {
        seed,
        window,
        embedding_dims: embedding.dims,
        assignments: assignments
            .iter()
            .map(|a| AssignmentOut {
                method: a.method.code().to_string(),
                k: a.k,
                silhouette: a.silhouette,
                labels: a.labels.clone(),
                clusters: a.members(),
            })
            .collect(),
        pairwise_ari: pairwise,
    };
    write_json(&out.join("cluster.json"), &report)?;
    Ok(())
}

pub fn report(data: &Path, window: Option<&str>, out: &Path) -> Result<(), CmdError> {
    let ds = load_dataset(data)?;
    let window = window_or_full(&ds, window)?;
    let cfg = HealthConfig::default();
    let scores = health_scores(&ds, window, &cfg)?;
    let corr = metric_correlation_matrix(&ds, CorrMethod::Pearson, window)?;
    let acf_table = tempstats::acf_lag_table(&ds, &MetricKind::ALL, &[1, 7, 14]);
    let advice = recalibration_advice(&scores, &corr, &acf_table, &cfg);

    #[derive(Serialize)]
    struct HealthReport {
        window: (u32, u32),
        scores: Vec<qhealth::health::HealthScore>,
        advice: qhealth::health::Advice,
        acf_table: Vec<tempstats::AcfTableRow>,
    }
    fs::create_dir_all(out)?;
    write_json(
        &out.join("health.json"),
        &HealthReport {
            window,
            scores,
            advice,
            acf_table,
        },
    )?;
    Ok(())
}

pub fn recommend(
    data: &Path,
    topology: Option<&Path>,
    k: usize,
    top: usize,
    greedy: bool,
    window: Option<&str>,
    out: &Path,
) -> Result<(), CmdError> {
    let mut ds = load_dataset(data)?;
    let topo = load_topology(topology)?;
    ds.attach_topology(&topo)?;
    let window = window_or_full(&ds, window)?;
    let mode = if greedy {
        SearchMode::Greedy
    } else {
        SearchMode::Exhaustive
    };
    let recs = recommend_subsets(&ds, &topo, k, top, window, &HealthConfig::default(), mode)?;
    fs::create_dir_all(out)?;
    let mut csv = String::from("rank,qubits,predicted_ghz_fidelity\n");
    for r in &recs {
        let path: Vec<String> = r.qubits.iter().map(|q| q.to_string()).collect();
        csv.push_str(&format!(
            "{},{},{}\n",
            r.rank,
            path.join("-"),
            r.predicted_ghz_fidelity
        ));
    }
    fs::write(out.join("subsets.csv"), csv)?;
    write_json(&out.join("subsets.json"), &recs)?;
    Ok(())
}

pub fn validate(
    data: &Path,
    clusters: &Path,
    method: Option<&str>,
    k: usize,
    window: Option<&str>,
    out: &Path,
) -> Result<(), CmdError> {
    let ds = load_dataset(data)?;
    let window = window_or_full(&ds, window)?;
    let text = fs::read_to_string(clusters).map_err(|e| {
        CmdError::Data(format!(
            "cannot read {}: {e}; run `qhealth cluster` first",
            clusters.display()
        ))
    })?;
    let report: ClusterReport = serde_json::from_str(&text)?;
    let chosen = match method {
        Some(m) => report
            .assignments
            .iter()
            .find(|a| a.method == m)
            .ok_or_else(|| {
                CmdError::Usage(format!("method {m:?} not present in {}", clusters.display()))
            })?,
        None => report
            .assignments
            .first()
            .ok_or_else(|| CmdError::Data("cluster.json holds no assignments".to_string()))?,
    };
    let assignment = ClusterAssignment {
        method: chosen
            .method
            .parse()
            .map_err(|e: String| CmdError::Data(e))?,
        k: chosen.k,
        labels: chosen.labels.clone(),
        silhouette: chosen.silhouette,
        seed: report.seed,
    };
    let validation = validate_clusters(&assignment, &ds, k, window, &HealthConfig::default())?;
    fs::create_dir_all(out)?;
    write_json(&out.join("validation.json"), &validation)?;
    Ok(())
}
