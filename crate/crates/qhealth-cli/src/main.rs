//! `qhealth`: calibration-analytics pipeline for superconducting QPUs.
//!
//! Subcommands wire the library into a file-based pipeline:
//! synth -> stats/corr -> cluster -> report/recommend/validate, plus a
//! standalone curve fitter. Every run with identical flags, inputs, and seed
//! produces byte-identical outputs. Data goes to files or stdout; errors go
//! to stderr as one machine-parsable line.
//!
//! Exit codes: 0 ok, 2 usage, 3 data validation, 4 numerical failure.

mod commands;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "qhealth", version, about = "Qubit calibration analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic calibration corpus.
    Synth {
        /// Use the built-in 20-qubit scenario.
        #[arg(long, conflicts_with = "scenario")]
        default: bool,
        /// Scenario JSON file.
        #[arg(long)]
        scenario: Option<std::path::PathBuf>,
        /// Generator seed.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Fit a decay model to a curve CSV (columns x,y).
    Fit {
        /// Model: exp, ramsey, or rb.
        #[arg(long)]
        model: String,
        /// Curve CSV path.
        #[arg(long)]
        curve: std::path::PathBuf,
        /// Output JSON path (stdout when omitted).
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Summary statistics, ACF arrays, instability rankings, histograms.
    Stats {
        #[arg(long)]
        data: std::path::PathBuf,
        #[arg(long)]
        out: std::path::PathBuf,
        /// Day window FROM:TO (defaults to the full span).
        #[arg(long)]
        window: Option<String>,
        #[arg(long, default_value_t = 30)]
        max_lag: usize,
    },
    /// Cross-metric dependence matrices over daily means.
    Corr {
        #[arg(long)]
        data: std::path::PathBuf,
        /// pearson, spearman, dcor, mi, or all.
        #[arg(long)]
        method: String,
        /// Day window FROM:TO.
        #[arg(long)]
        window: String,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Embed the topology and cluster qubits on metric + topology features.
    Cluster {
        #[arg(long)]
        data: std::path::PathBuf,
        /// Topology JSON (defaults to the bundled device).
        #[arg(long)]
        topology: Option<std::path::PathBuf>,
        /// kmeans, gmm, spectral, node2vec-kmeans, or all.
        #[arg(long, default_value = "node2vec-kmeans")]
        method: String,
        /// Cluster count, or "auto" for silhouette selection over 2..=6.
        #[arg(long, default_value = "auto")]
        k: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Day window FROM:TO (defaults to the full span).
        #[arg(long)]
        window: Option<String>,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Health scores, flags, and recalibration actions.
    Report {
        #[arg(long)]
        data: std::path::PathBuf,
        /// Day window FROM:TO (defaults to the full span).
        #[arg(long)]
        window: Option<String>,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Rank connected qubit subsets by predicted GHZ fidelity.
    Recommend {
        #[arg(long)]
        data: std::path::PathBuf,
        #[arg(long)]
        topology: Option<std::path::PathBuf>,
        /// Subset size.
        #[arg(long)]
        k: usize,
        /// How many subsets to keep.
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Greedy chain growth instead of exhaustive enumeration (needed
        /// for k > 7).
        #[arg(long)]
        greedy: bool,
        #[arg(long)]
        window: Option<String>,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// GHZ-estimate distributions per cluster from a cluster.json.
    Validate {
        #[arg(long)]
        data: std::path::PathBuf,
        /// cluster.json produced by the cluster subcommand.
        #[arg(long)]
        clusters: std::path::PathBuf,
        /// Method to validate (defaults to the first in the file).
        #[arg(long)]
        method: Option<String>,
        /// Subset size per GHZ estimate.
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        window: Option<String>,
        #[arg(long)]
        out: std::path::PathBuf,
    },
}

fn main() {
    if let Ok(threads) = std::env::var("QHEALTH_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth {
            default,
            scenario,
            seed,
            out,
        } => commands::synth(default, scenario.as_deref(), seed, &out),
        Command::Fit { model, curve, out } => commands::fit(&model, &curve, out.as_deref()),
        Command::Stats {
            data,
            out,
            window,
            max_lag,
        } => commands::stats(&data, &out, window.as_deref(), max_lag),
        Command::Corr {
            data,
            method,
            window,
            out,
        } => commands::corr(&data, &method, &window, &out),
        Command::Cluster {
            data,
            topology,
            method,
            k,
            seed,
            window,
            out,
        } => commands::cluster(
            &data,
            topology.as_deref(),
            &method,
            &k,
            seed,
            window.as_deref(),
            &out,
        ),
        Command::Report { data, window, out } => {
            commands::report(&data, window.as_deref(), &out)
        }
        Command::Recommend {
            data,
            topology,
            k,
            top,
            greedy,
            window,
            out,
        } => commands::recommend(
            &data,
            topology.as_deref(),
            k,
            top,
            greedy,
            window.as_deref(),
            &out,
        ),
        Command::Validate {
            data,
            clusters,
            method,
            k,
            window,
            out,
        } => commands::validate(
            &data,
            &clusters,
            method.as_deref(),
            k,
            window.as_deref(),
            &out,
        ),
    };
    if let Err(e) = result {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
