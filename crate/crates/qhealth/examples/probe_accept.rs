use qhealth::caldata::MetricKind;
use qhealth::cluster::{adjusted_rand_index, run_method, select_k, ClusterMethod};
use qhealth::graphembed::{embed, qubit_features, EmbedParams};
use qhealth::health::{validate_clusters, HealthConfig};
use qhealth::cluster::ClusterAssignment;
use qhealth::synthdev::{default_scenario, generate_corpus, DEFAULT_NOISY_QUBITS};
use qhealth::xcorr::{metric_correlation_matrix, CorrMethod};

fn main() {
    for seed in [7u64, 19, 42] {
        println!("===== seed {seed} =====");
        let sc = default_scenario(seed);
        let ds = generate_corpus(&sc).unwrap();
        let planted: Vec<usize> = (0..20)
            .map(|q| usize::from(DEFAULT_NOISY_QUBITS.contains(&(q as u32))))
            .collect();

        // Clustering on combined features.
        let emb = embed(&sc.topology, &EmbedParams { seed, ..EmbedParams::default() }).unwrap();
        let feats = qubit_features(&ds, &emb, (0, 249)).unwrap();
        for method in ClusterMethod::ALL {
            let a = run_method(&feats, method, 2, None, seed).unwrap();
            let ari = adjusted_rand_index(&a.labels, &planted).unwrap();
            let sel = select_k(&feats, method, 2..=6, None, seed).unwrap();
            println!(
                "{:>16}: ARI {:.3}  select_k -> {} (sil {:.3})",
                method.code(),
                ari,
                sel.k,
                sel.silhouette
            );
        }

        // Correlation block structure over the post-cool-down window.
        let window = (130u32, 209u32);
        let fid = [MetricKind::ReadoutFidelity, MetricKind::Fidelity1Q, MetricKind::Fidelity2Q];
        let coh = [MetricKind::T1, MetricKind::T2Star, MetricKind::T2Echo];
        for method in CorrMethod::ALL {
            let m = metric_correlation_matrix(&ds, method, window).unwrap();
            let mut min_fid = f64::INFINITY;
            for i in 0..3 {
                for j in (i + 1)..3 {
                    min_fid = min_fid.min(m.get(fid[i], fid[j]).abs());
                }
            }
            let mut max_cross = f64::NEG_INFINITY;
            for &a in &fid {
                for &b in &coh {
                    max_cross = max_cross.max(m.get(a, b).abs());
                }
            }
            let t1_t2e = m.get(MetricKind::T1, MetricKind::T2Echo);
            let t1_fro = m.get(MetricKind::T1, MetricKind::ReadoutFidelity);
            println!(
                "{:>9}: min_fid_block {:.3}  max_cross {:.3}  ok={}  t1-t2e {:.3} t1-fro {:.3}",
                method.code(),
                min_fid,
                max_cross,
                min_fid > max_cross,
                t1_t2e,
                t1_fro,
            );
        }

        // GHZ validation gap at k = 5 on the planted families.
        let assignment =
            ClusterAssignment::from_labels(&feats, planted.clone(), ClusterMethod::KMeans, seed)
                .unwrap();
        let report = validate_clusters(&assignment, &ds, 5, (0, 249), &HealthConfig::default()).unwrap();
        for c in &report.per_cluster {
            println!(
                "cluster {}: n_qubits {} subsets {} mean {:.4} std {:.4}",
                c.cluster, c.n_qubits, c.n_subsets, c.mean, c.std
            );
        }
        println!("gap: {:?}", report.gap);
    }
}
