//! End-to-end behavior of the synthetic corpus: every planted structure the
//! generator promises must be recoverable by the analysis stack.

use qhealth::caldata::{Dataset, MetricKind, TargetId};
use qhealth::cluster::ClusterMethod;
use qhealth::graphembed::{embed, qubit_features, DeviceTopology, EmbedParams};
use qhealth::health::{
    health_scores, recalibration_advice, Action, HealthConfig, HealthFlag,
};
use qhealth::synthdev::{
    default_scenario, generate_corpus, DriftSigmas, DEFAULT_NOISY_QUBITS,
};
use qhealth::tempstats::{acf_lag_table, drop_detector, histogram, instability_ranking, summary};
use qhealth::xcorr::{metric_correlation_matrix, CorrMethod};

const SEED: u64 = 7;

#[test]
fn corpus_roundtrips_through_csv_byte_identically() {
    let ds = generate_corpus(&default_scenario(SEED)).unwrap();
    let mut first = Vec::new();
    ds.to_csv_writer(&mut first).unwrap();
    let reloaded = Dataset::from_csv_reader(first.as_slice()).unwrap();
    let mut second = Vec::new();
    reloaded.to_csv_writer(&mut second).unwrap();
    assert_eq!(first, second);
    assert_eq!(ds.records(), reloaded.records());
}

#[test]
fn corpus_roundtrips_through_json() {
    let ds = generate_corpus(&default_scenario(3)).unwrap();
    let dir = std::env::temp_dir().join("qhealth-json-roundtrip");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("corpus.json");
    ds.emit_json(&path).unwrap();
    let reloaded = Dataset::ingest_json(&path).unwrap();
    assert_eq!(ds.records(), reloaded.records());
}

#[test]
fn daily_mean_post_cooldown_window_has_80_points() {
    let ds = generate_corpus(&default_scenario(SEED)).unwrap();
    let m = ds.daily_mean(MetricKind::T1, Some((130, 209))).unwrap();
    assert_eq!(m.len(), 80);
}

#[test]
fn pooled_t1_summary_matches_published_statistics() {
    let ds = generate_corpus(&default_scenario(SEED)).unwrap();
    let values: Vec<f64> = ds
        .records()
        .iter()
        .filter(|r| r.metric == MetricKind::T1)
        .map(|r| r.value)
        .collect();
    let stats = qhealth::tempstats::summary_values(&values).unwrap();
    assert!((stats.mean - 40.95).abs() < 1.0, "mean {}", stats.mean);
    assert!((stats.std - 10.54).abs() < 2.0, "std {}", stats.std);
}

#[test]
fn acf_lag_table_shape_and_t1_row() {
    let ds = generate_corpus(&default_scenario(SEED)).unwrap();
    let metrics = [
        MetricKind::T1,
        MetricKind::ReadoutFidelity,
        MetricKind::Fidelity1Q,
    ];
    let table = acf_lag_table(&ds, &metrics, &[1, 7, 14]);
    assert_eq!(table.len(), 3);
    for row in &table {
        assert_eq!(row.mean.len(), 3);
        assert_eq!(row.std.len(), 3);
        assert_eq!(row.n_targets, 20);
        assert_eq!(row.n_excluded, 0);
    }
    // Day-to-day memory of T1 sits near the published lag-1 level.
    let t1 = &table[0];
    assert!(
        (t1.mean[0] - 0.10).abs() <= 0.05,
        "T1 ACF(1) mean {}",
        t1.mean[0]
    );
    // Memory decays with lag.
    assert!(t1.mean[0] > t1.mean[2]);
}

#[test]
fn acf_lag_table_excludes_constant_series_with_annotation() {
    let mut sc = default_scenario(1);
    sc.n_days = 60;
    // One qubit with a dead-flat T1.
    sc.profiles[4].drift_rho = 0.0;
    sc.profiles[4].drift_sigma = DriftSigmas {
        t1: 0.0,
        t2star: 0.0,
        t2echo: 0.0,
        readout: 0.0,
        f1q: 0.0,
    };
    sc.profiles[4].tls_rate = 0.0;
    sc.warmup_days.clear();
    let ds = generate_corpus(&sc).unwrap();
    let table = acf_lag_table(&ds, &[MetricKind::T1], &[1, 7, 14]);
    assert_eq!(table[0].n_targets, 19);
    assert_eq!(table[0].n_excluded, 1);
}

#[test]
fn f2q_distribution_is_left_skewed_with_heavy_lower_tail() {
    let ds = generate_corpus(&default_scenario(SEED)).unwrap();
    let values: Vec<f64> = ds
        .records()
        .iter()
        .filter(|r| r.metric == MetricKind::Fidelity2Q)
        .map(|r| r.value)
        .collect();
    let stats = qhealth::tempstats::summary_values(&values).unwrap();
    assert!(stats.skewness < 0.0, "skew {}", stats.skewness);
    assert!(stats.lower_tail_frac > 0.0);
    let h = histogram(&values, 40).unwrap();
    assert_eq!(h.counts.iter().sum::<u64>() as usize, values.len());
}

#[test]
fn unstable_couplers_touch_the_planted_worst_qubits() {
    let ds = generate_corpus(&default_scenario(SEED)).unwrap();
    let ranking = instability_ranking(&ds, MetricKind::Fidelity2Q);
    assert_eq!(ranking.len(), 30);
    let worst = [3u32, 5, 10];
    // Nine couplers touch qubits 3, 5, or 10; they occupy the top ranks.
    for (target, _) in ranking.iter().take(9) {
        let touches = target.qubits().iter().any(|q| worst.contains(q));
        assert!(touches, "top-rank coupler {target} avoids qubits 3/5/10");
    }
}

#[test]
fn warmup_day_flagged_across_most_f1q_series() {
    let ds = generate_corpus(&default_scenario(SEED)).unwrap();
    let mut flagged = 0;
    for q in 0..20u32 {
        let s = ds.series(TargetId::Qubit(q), MetricKind::Fidelity1Q);
        let drops = drop_detector(&s, 5.0).unwrap();
        if drops.iter().any(|&(day, _)| day == 130) {
            flagged += 1;
        }
    }
    assert!(flagged >= 16, "day 130 flagged on only {flagged}/20 qubits");
}

#[test]
fn feature_centroids_separate_planted_families() {
    let sc = default_scenario(SEED);
    let ds = generate_corpus(&sc).unwrap();
    let emb = embed(
        &sc.topology,
        &EmbedParams {
            seed: SEED,
            ..EmbedParams::default()
        },
    )
    .unwrap();
    let feats = qubit_features(&ds, &emb, (0, 249)).unwrap();
    let dims = feats[0].len();
    let mut stable = vec![0.0; dims];
    let mut noisy = vec![0.0; dims];
    let (mut ns, mut nn) = (0.0, 0.0);
    for (q, row) in feats.iter().enumerate() {
        if DEFAULT_NOISY_QUBITS.contains(&(q as u32)) {
            nn += 1.0;
            for (a, b) in noisy.iter_mut().zip(row) {
                *a += b;
            }
        } else {
            ns += 1.0;
            for (a, b) in stable.iter_mut().zip(row) {
                *a += b;
            }
        }
    }
    let gap: f64 = stable
        .iter()
        .zip(&noisy)
        .map(|(s, n)| (s / ns - n / nn).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(gap > 1.0, "family centroid separation {gap}");
}

#[test]
fn health_scores_separate_families_and_advice_flags_warmups() {
    let ds = generate_corpus(&default_scenario(SEED)).unwrap();
    let cfg = HealthConfig::default();
    let scores = health_scores(&ds, (0, 249), &cfg).unwrap();
    let (mut stable, mut noisy) = (Vec::new(), Vec::new());
    for s in &scores {
        let TargetId::Qubit(q) = s.target else { panic!() };
        if DEFAULT_NOISY_QUBITS.contains(&q) {
            noisy.push(s.score);
        } else {
            stable.push(s.score);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(
        mean(&stable) - mean(&noisy) >= 0.15,
        "score gap {} (stable {}, noisy {})",
        mean(&stable) - mean(&noisy),
        mean(&stable),
        mean(&noisy)
    );

    let corr = metric_correlation_matrix(&ds, CorrMethod::Pearson, (130, 209)).unwrap();
    let acf_table = acf_lag_table(&ds, &MetricKind::ALL, &[1, 7, 14]);
    let advice = recalibration_advice(&scores, &corr, &acf_table, &cfg);
    // Both warm-up events produce a global action covering their day.
    for event in [130u32, 180] {
        assert!(
            advice.actions.iter().any(|a| matches!(
                a,
                Action::GlobalRecalibration { day_from, day_to, .. }
                if *day_from <= event && event <= *day_to
            )),
            "no global action covering day {event}: {:?}",
            advice.actions
        );
    }
    assert!(advice.coherence_comovement > 0.2);
}

#[test]
fn single_bad_qubit_gets_exactly_one_targeted_action() {
    // Constructed device: all healthy except qubit 6, which has a strong
    // persistent TLS episode that wrecks its coherence and fidelity.
    let mut sc = default_scenario(2);
    sc.warmup_days.clear();
    for (q, p) in sc.profiles.iter_mut().enumerate() {
        p.family = qhealth::synthdev::Family::Stable;
        p.t1_mean = 45.0;
        p.t2star_mean = 4.0;
        p.t2echo_mean = 19.0;
        p.readout_mean = 0.975;
        p.f1q_mean = 0.9985;
        p.drift_rho = 0.05;
        p.drift_sigma = DriftSigmas {
            t1: 0.15,
            t2star: 0.4,
            t2echo: 0.2,
            readout: 0.005,
            f1q: 0.0008,
        };
        p.tls_rate = 0.0;
        if q == 6 {
            p.t1_mean = 12.0;
            p.t2star_mean = 1.0;
            p.t2echo_mean = 5.5;
            p.readout_mean = 0.88;
            p.f1q_mean = 0.988;
            p.tls_rate = 0.25;
            p.tls_depth = 0.6;
        }
    }
    for (i, f) in sc.f2q_base.iter_mut().enumerate() {
        let (a, b) = sc.topology.edges[i];
        *f = if a == 6 || b == 6 { 0.93 } else { 0.992 };
    }
    for s in sc.f2q_sigma.iter_mut() {
        *s = 0.004;
    }
    let ds = generate_corpus(&sc).unwrap();
    let cfg = HealthConfig::default();
    let scores = health_scores(&ds, (0, 249), &cfg).unwrap();
    let corr = metric_correlation_matrix(&ds, CorrMethod::Pearson, (0, 249)).unwrap();
    let advice = recalibration_advice(&scores, &corr, &[], &cfg);
    let targeted: Vec<&Action> = advice
        .actions
        .iter()
        .filter(|a| matches!(a, Action::TargetedRecalibration { .. }))
        .collect();
    assert_eq!(targeted.len(), 1, "{:?}", advice.actions);
    assert!(matches!(
        targeted[0],
        Action::TargetedRecalibration {
            target: TargetId::Qubit(6),
            ..
        }
    ));
    // The planted episode also leaves a TLS fingerprint on qubit 6.
    let q6 = &scores[6];
    assert!(q6.flags.iter().any(|f| matches!(f, HealthFlag::TlsSuspect)));
}

#[test]
fn bundled_topology_matches_default_device() {
    let loaded = DeviceTopology::from_json(qhealth::graphembed::DEFAULT_TOPOLOGY_JSON).unwrap();
    assert_eq!(loaded, DeviceTopology::default_device());
}

#[test]
fn cluster_method_codes_cover_spec_names() {
    // The four published methods, exactly.
    let codes: Vec<&str> = ClusterMethod::ALL.iter().map(|m| m.code()).collect();
    assert_eq!(codes, vec!["kmeans", "gmm", "spectral", "node2vec-kmeans"]);
}
