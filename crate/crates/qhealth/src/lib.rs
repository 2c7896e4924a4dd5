//! Calibration analytics for superconducting quantum processors.
//!
//! The crate turns daily calibration records (coherence times, readout and
//! gate fidelities) into device-health insight: decay-curve fits, temporal
//! and distributional statistics, cross-metric dependence matrices, qubit
//! clustering on metric-plus-topology features, and noise-aware subset
//! recommendations for circuit mapping. A built-in synthetic device
//! generator with planted qubit families serves as the ground-truth oracle
//! for end-to-end validation.

pub mod caldata;
pub mod cluster;
pub mod fitkit;
pub mod graphembed;
pub mod health;
pub mod synthdev;
pub mod tempstats;
pub mod xcorr;

pub(crate) mod linalg;
pub(crate) mod seed;

pub use caldata::{CalibrationRecord, Dataset, MetricKind, MetricSeries, TargetId};
pub use graphembed::DeviceTopology;
