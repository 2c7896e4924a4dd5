//! Canonical data model for calibration metrics and file ingestion/emission.
//!
//! A dataset is a flat collection of dated metric readings, one per
//! (day, target, metric). Days are plain integer indices; missing days stay
//! missing — nothing here interpolates. The CSV schema is
//! `day,target,metric,value,stderr` with targets written `q<N>` or `c<A>-<B>`
//! (A < B) and metrics `T1,T2STAR,T2ECHO,FRO,F1Q,F2Q`. A JSON mirror with the
//! same field names is accepted and emitted.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphembed::DeviceTopology;

/// Calibration quality metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetricKind {
    /// Relaxation time, microseconds.
    T1,
    /// Ramsey dephasing time, microseconds.
    T2Star,
    /// Spin-echo dephasing time, microseconds.
    T2Echo,
    /// Readout assignment fidelity, dimensionless in [0, 1].
    ReadoutFidelity,
    /// Single-qubit gate fidelity, dimensionless in [0, 1].
    Fidelity1Q,
    /// Two-qubit gate fidelity, attached to couplers, in [0, 1].
    Fidelity2Q,
}

impl MetricKind {
    /// All metrics in canonical order.
    pub const ALL: [MetricKind; 6] = [
        MetricKind::T1,
        MetricKind::T2Star,
        MetricKind::T2Echo,
        MetricKind::ReadoutFidelity,
        MetricKind::Fidelity1Q,
        MetricKind::Fidelity2Q,
    ];

    /// The five metrics attached to single qubits.
    pub const SINGLE_QUBIT: [MetricKind; 5] = [
        MetricKind::T1,
        MetricKind::T2Star,
        MetricKind::T2Echo,
        MetricKind::ReadoutFidelity,
        MetricKind::Fidelity1Q,
    ];

    /// Wire code used in CSV/JSON files.
    pub fn code(self) -> &'static str {
        match self {
            MetricKind::T1 => "T1",
            MetricKind::T2Star => "T2STAR",
            MetricKind::T2Echo => "T2ECHO",
            MetricKind::ReadoutFidelity => "FRO",
            MetricKind::Fidelity1Q => "F1Q",
            MetricKind::Fidelity2Q => "F2Q",
        }
    }

    /// True for the three dimensionless fidelities.
    pub fn is_fidelity(self) -> bool {
        matches!(
            self,
            MetricKind::ReadoutFidelity | MetricKind::Fidelity1Q | MetricKind::Fidelity2Q
        )
    }

    /// True for metrics that attach to couplers rather than single qubits.
    pub fn attaches_to_coupler(self) -> bool {
        matches!(self, MetricKind::Fidelity2Q)
    }

    /// Check a raw value against the metric's range invariant.
    pub fn value_in_range(self, value: f64) -> bool {
        if self.is_fidelity() {
            (0.0..=1.0).contains(&value)
        } else {
            value > 0.0 && value.is_finite()
        }
    }
}

impl FromStr for MetricKind {
    type Err = CalDataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "T1" => Ok(MetricKind::T1),
            "T2STAR" => Ok(MetricKind::T2Star),
            "T2ECHO" => Ok(MetricKind::T2Echo),
            "FRO" => Ok(MetricKind::ReadoutFidelity),
            "F1Q" => Ok(MetricKind::Fidelity1Q),
            "F2Q" => Ok(MetricKind::Fidelity2Q),
            other => Err(CalDataError::UnknownMetric(other.to_string())),
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl Serialize for MetricKind {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for MetricKind {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A measurement target: one qubit or one coupler (qubit pair).
///
/// Coupler endpoints are distinct and stored in ascending order. The derived
/// ordering (qubits by index, then couplers by endpoints) is the canonical
/// target order used when sorting datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TargetId {
    Qubit(u32),
    Coupler(u32, u32),
}

impl TargetId {
    /// Coupler with endpoints normalized to ascending order.
    pub fn coupler(a: u32, b: u32) -> Result<Self, CalDataError> {
        if a == b {
            return Err(CalDataError::BadTarget(format!("c{a}-{b}")));
        }
        Ok(TargetId::Coupler(a.min(b), a.max(b)))
    }

    pub fn is_coupler(self) -> bool {
        matches!(self, TargetId::Coupler(_, _))
    }

    /// Qubit indices touched by this target.
    pub fn qubits(self) -> Vec<u32> {
        match self {
            TargetId::Qubit(q) => vec![q],
            TargetId::Coupler(a, b) => vec![a, b],
        }
    }
}

impl fmt::Display for TargetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetId::Qubit(q) => write!(f, "q{q}"),
            TargetId::Coupler(a, b) => write!(f, "c{a}-{b}"),
        }
    }
}

impl FromStr for TargetId {
    type Err = CalDataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CalDataError::BadTarget(s.to_string());
        if let Some(rest) = s.strip_prefix('q') {
            let idx: u32 = rest.parse().map_err(|_| bad())?;
            Ok(TargetId::Qubit(idx))
        } else if let Some(rest) = s.strip_prefix('c') {
            let (a, b) = rest.split_once('-').ok_or_else(bad)?;
            let a: u32 = a.parse().map_err(|_| bad())?;
            let b: u32 = b.parse().map_err(|_| bad())?;
            if a >= b {
                return Err(bad());
            }
            Ok(TargetId::Coupler(a, b))
        } else {
            Err(bad())
        }
    }
}

impl Serialize for TargetId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TargetId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One dated measurement of one metric for one target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub day: u32,
    pub target: TargetId,
    pub metric: MetricKind,
    pub value: f64,
    pub stderr: Option<f64>,
}

impl CalibrationRecord {
    /// Check range and target/metric attachment invariants.
    pub fn validate(&self) -> Result<(), CalDataError> {
        if !self.metric.value_in_range(self.value) {
            return Err(CalDataError::ValueOutOfRange {
                target: self.target,
                metric: self.metric,
                value: self.value,
            });
        }
        if let Some(se) = self.stderr {
            if !(se >= 0.0 && se.is_finite()) {
                return Err(CalDataError::BadStderr {
                    target: self.target,
                    stderr: se,
                });
            }
        }
        if self.metric.attaches_to_coupler() != self.target.is_coupler() {
            return Err(CalDataError::TargetMetricMismatch {
                target: self.target,
                metric: self.metric,
            });
        }
        Ok(())
    }

    fn key(&self) -> (u32, TargetId, MetricKind) {
        (self.day, self.target, self.metric)
    }
}

/// Gap-tolerant daily time series of one metric for one target.
///
/// `target` is `None` for aggregate series such as daily means. Days are
/// strictly increasing; missing days are preserved as gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub target: Option<TargetId>,
    pub metric: MetricKind,
    pub points: Vec<(u32, f64)>,
}

impl MetricSeries {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of calendar days covered, first to last inclusive.
    pub fn span_days(&self) -> u32 {
        match (self.points.first(), self.points.last()) {
            (Some(&(first, _)), Some(&(last, _))) => last - first + 1,
            _ => 0,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|&(_, v)| v).collect()
    }

    pub fn days(&self) -> Vec<u32> {
        self.points.iter().map(|&(d, _)| d).collect()
    }

    /// Longest run of consecutive days, as a slice of the points.
    ///
    /// Regular-sampling statistics (notably the ACF) operate on this run when
    /// the series has gaps.
    pub fn longest_contiguous_run(&self) -> &[(u32, f64)] {
        if self.points.is_empty() {
            return &[];
        }
        let mut best = (0usize, 1usize);
        let mut start = 0usize;
        for i in 1..self.points.len() {
            if self.points[i].0 != self.points[i - 1].0 + 1 {
                start = i;
            }
            let len = i - start + 1;
            if len > best.1 {
                best = (start, len);
            }
        }
        &self.points[best.0..best.0 + best.1]
    }

    /// Restrict to days in `[day_from, day_to]` inclusive.
    pub fn window(&self, day_from: u32, day_to: u32) -> MetricSeries {
        MetricSeries {
            target: self.target,
            metric: self.metric,
            points: self
                .points
                .iter()
                .filter(|&&(d, _)| d >= day_from && d <= day_to)
                .copied()
                .collect(),
        }
    }
}

/// Errors from dataset construction and file I/O.
#[derive(Debug, Error)]
pub enum CalDataError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("unexpected header {found:?}, want \"day,target,metric,value,stderr\"")]
    HeaderMismatch { found: String },
    #[error("unknown metric code {0:?}")]
    UnknownMetric(String),
    #[error("bad target {0:?}, want q<N> or c<A>-<B> with A<B")]
    BadTarget(String),
    #[error("{metric} value {value} out of range for {target}")]
    ValueOutOfRange {
        target: TargetId,
        metric: MetricKind,
        value: f64,
    },
    #[error("negative or non-finite stderr {stderr} for {target}")]
    BadStderr { target: TargetId, stderr: f64 },
    #[error("{metric} cannot attach to {target}")]
    TargetMetricMismatch { target: TargetId, metric: MetricKind },
    #[error("duplicate record for day {day}, {target}, {metric}")]
    DuplicateRecord {
        day: u32,
        target: TargetId,
        metric: MetricKind,
    },
    #[error("coupler {0} is not an edge of topology {1:?}")]
    UnknownCoupler(TargetId, String),
    #[error("window is empty: day_from {0} > day_to {1}")]
    EmptyWindow(u32, u32),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Immutable collection of validated calibration records.
///
/// Construction validates every record and rejects duplicate
/// (day, target, metric) keys; afterwards the dataset is read-only and safe
/// to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<CalibrationRecord>,
    pub topology_ref: Option<String>,
}

impl Dataset {
    /// Build a dataset from records, sorting canonically and validating.
    pub fn new(mut records: Vec<CalibrationRecord>) -> Result<Self, CalDataError> {
        for r in &records {
            r.validate()?;
        }
        records.sort_by_key(|r| r.key());
        for pair in records.windows(2) {
            if pair[0].key() == pair[1].key() {
                return Err(CalDataError::DuplicateRecord {
                    day: pair[0].day,
                    target: pair[0].target,
                    metric: pair[0].metric,
                });
            }
        }
        Ok(Dataset {
            records,
            topology_ref: None,
        })
    }

    pub fn records(&self) -> &[CalibrationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Targets present in the dataset, in canonical order.
    pub fn targets(&self) -> Vec<TargetId> {
        let mut ts: Vec<TargetId> = self.records.iter().map(|r| r.target).collect();
        ts.sort();
        ts.dedup();
        ts
    }

    /// Qubit indices present (directly or as coupler endpoints), ascending.
    pub fn qubits(&self) -> Vec<u32> {
        let mut qs: Vec<u32> = self
            .records
            .iter()
            .flat_map(|r| r.target.qubits())
            .collect();
        qs.sort_unstable();
        qs.dedup();
        qs
    }

    /// Couplers with data, ascending.
    pub fn couplers(&self) -> Vec<TargetId> {
        let mut cs: Vec<TargetId> = self
            .records
            .iter()
            .filter(|r| r.target.is_coupler())
            .map(|r| r.target)
            .collect();
        cs.sort();
        cs.dedup();
        cs
    }

    /// Last day index present, if any.
    pub fn last_day(&self) -> Option<u32> {
        self.records.iter().map(|r| r.day).max()
    }

    /// Attach a topology reference, checking that every coupler in the data
    /// is an edge of the topology.
    pub fn attach_topology(&mut self, topo: &DeviceTopology) -> Result<(), CalDataError> {
        for c in self.couplers() {
            if let TargetId::Coupler(a, b) = c {
                if !topo.has_edge(a, b) {
                    return Err(CalDataError::UnknownCoupler(c, topo.name.clone()));
                }
            }
        }
        self.topology_ref = Some(topo.name.clone());
        Ok(())
    }

    /// All points for one (target, metric), in day order. Empty if none.
    pub fn series(&self, target: TargetId, metric: MetricKind) -> MetricSeries {
        let points = self
            .records
            .iter()
            .filter(|r| r.target == target && r.metric == metric)
            .map(|r| (r.day, r.value))
            .collect();
        MetricSeries {
            target: Some(target),
            metric,
            points,
        }
    }

    /// Cross-target daily mean of one metric, optionally windowed.
    ///
    /// One point per day with at least one record; the value is the
    /// arithmetic mean across the targets present that day.
    pub fn daily_mean(
        &self,
        metric: MetricKind,
        window: Option<(u32, u32)>,
    ) -> Result<MetricSeries, CalDataError> {
        if let Some((from, to)) = window {
            if from > to {
                return Err(CalDataError::EmptyWindow(from, to));
            }
        }
        let mut acc: BTreeMap<u32, (f64, u32)> = BTreeMap::new();
        for r in &self.records {
            if r.metric != metric {
                continue;
            }
            if let Some((from, to)) = window {
                if r.day < from || r.day > to {
                    continue;
                }
            }
            let e = acc.entry(r.day).or_insert((0.0, 0));
            e.0 += r.value;
            e.1 += 1;
        }
        let points = acc
            .into_iter()
            .map(|(day, (sum, n))| (day, sum / n as f64))
            .collect();
        Ok(MetricSeries {
            target: None,
            metric,
            points,
        })
    }

    /// Parse the CSV wire format from a reader.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, CalDataError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);
        {
            let headers = rdr.headers().map_err(csv_to_err)?;
            let want = ["day", "target", "metric", "value", "stderr"];
            if headers.len() != want.len() || headers.iter().zip(want).any(|(h, w)| h != w) {
                return Err(CalDataError::HeaderMismatch {
                    found: headers.iter().collect::<Vec<_>>().join(","),
                });
            }
        }
        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(csv_to_err)?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            let field = |i: usize| row.get(i).unwrap_or("");
            let malformed = |reason: String| CalDataError::MalformedRow { line, reason };
            let day: u32 = field(0)
                .parse()
                .map_err(|_| malformed(format!("bad day {:?}", field(0))))?;
            let target: TargetId = field(1)
                .parse()
                .map_err(|_| malformed(format!("bad target {:?}", field(1))))?;
            let metric: MetricKind = field(2)
                .parse()
                .map_err(|_| malformed(format!("bad metric {:?}", field(2))))?;
            let value: f64 = field(3)
                .parse()
                .map_err(|_| malformed(format!("bad value {:?}", field(3))))?;
            let stderr = if field(4).is_empty() {
                None
            } else {
                Some(
                    field(4)
                        .parse()
                        .map_err(|_| malformed(format!("bad stderr {:?}", field(4))))?,
                )
            };
            records.push(CalibrationRecord {
                day,
                target,
                metric,
                value,
                stderr,
            });
        }
        Dataset::new(records)
    }

    /// Ingest the CSV wire format from a file.
    pub fn ingest_csv<P: AsRef<Path>>(path: P) -> Result<Self, CalDataError> {
        Self::from_csv_reader(BufReader::new(File::open(path)?))
    }

    /// Emit the CSV wire format in canonical (day, target, metric) order.
    pub fn to_csv_writer<W: Write>(&self, mut w: W) -> Result<(), CalDataError> {
        writeln!(w, "day,target,metric,value,stderr")?;
        for r in &self.records {
            match r.stderr {
                Some(se) => writeln!(w, "{},{},{},{},{}", r.day, r.target, r.metric, r.value, se)?,
                None => writeln!(w, "{},{},{},{},", r.day, r.target, r.metric, r.value)?,
            }
        }
        Ok(())
    }

    pub fn emit_csv<P: AsRef<Path>>(&self, path: P) -> Result<(), CalDataError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.to_csv_writer(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Ingest the JSON mirror (array of record objects).
    pub fn ingest_json<P: AsRef<Path>>(path: P) -> Result<Self, CalDataError> {
        let records: Vec<CalibrationRecord> =
            serde_json::from_reader(BufReader::new(File::open(path)?))?;
        Dataset::new(records)
    }

    /// Emit the JSON mirror in canonical order.
    pub fn emit_json<P: AsRef<Path>>(&self, path: P) -> Result<(), CalDataError> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, &self.records)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

fn csv_to_err(e: csv::Error) -> CalDataError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    CalDataError::MalformedRow {
        line,
        reason: e.to_string(),
    }
}
