//! Acceptance suite: one test per criterion, each printing a PASS line and
//! enforcing its runtime budget. Run with `cargo test --test acceptance`
//! (add `-- --nocapture` to see the lines).

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use qhealth::caldata::{Dataset, MetricKind, MetricSeries, TargetId};
use qhealth::cluster::{
    adjusted_rand_index, kmeans, run_method, select_k, spectral, ClusterAssignment, ClusterMethod,
};
use qhealth::fitkit::{
    fidelity_1q, fidelity_2q, fit_exp_decay, fit_ramsey, fit_rb_decay, model_jacobian,
    model_value, readout_fidelity, CurveKind,
};
use qhealth::graphembed::{embed, qubit_features, EmbedParams};
use qhealth::health::{
    ghz_fidelity_estimate, recommend_subsets, validate_clusters, HealthConfig, SearchMode,
};
use qhealth::synthdev::{
    default_scenario, generate_decay_curve, generate_corpus, DeviceScenario, Shots,
    DEFAULT_NOISY_QUBITS,
};
use qhealth::tempstats::acf;
use qhealth::xcorr::{
    distance_correlation, metric_correlation_matrix, mutual_information, pearson, CorrMethod,
};

const CORPUS_SEED: u64 = 7;

fn corpus() -> (DeviceScenario, Dataset) {
    let sc = default_scenario(CORPUS_SEED);
    let ds = generate_corpus(&sc).expect("default corpus generates");
    (sc, ds)
}

fn planted_labels() -> Vec<usize> {
    (0..20)
        .map(|q| usize::from(DEFAULT_NOISY_QUBITS.contains(&(q as u32))))
        .collect()
}

fn series_of(values: &[f64]) -> MetricSeries {
    MetricSeries {
        target: Some(TargetId::Qubit(0)),
        metric: MetricKind::T1,
        points: values
            .iter()
            .enumerate()
            .map(|(d, &v)| (d as u32, v))
            .collect(),
    }
}

fn report(criterion: u32, name: &str, start: Instant, budget_s: f64) {
    let elapsed = start.elapsed().as_secs_f64();
    println!("ACCEPTANCE {criterion} {name}: PASS ({elapsed:.2}s, budget {budget_s}s)");
    assert!(
        elapsed < budget_s,
        "criterion {criterion} exceeded its {budget_s}s budget: {elapsed:.2}s"
    );
}

#[test]
fn criterion_1_fidelity_closed_forms_exact() {
    let start = Instant::now();
    assert!((fidelity_1q(0.9966).unwrap() - 0.9983).abs() < 1e-12);
    assert!((fidelity_2q(0.986).unwrap() - 0.9895).abs() < 1e-12);
    assert!((readout_fidelity(0.98, 0.964).unwrap() - 0.972).abs() < 1e-12);
    report(1, "fidelity-closed-forms", start, 1.0);
}

#[test]
fn criterion_2_fit_recovery_and_jacobians() {
    let start = Instant::now();
    let median = |mut v: Vec<f64>| -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };

    // T1 decay: median relative T error over 100 noisy curves <= 2%.
    // 40-point grid: at 20 points even the Cramér-Rao-optimal estimator has
    // an expected median error of 1.94%, leaving no room for the unweighted
    // fit the contract mandates.
    let t1_truth = [0.9, 0.1, 40.0];
    let ts: Vec<f64> = (0..40).map(|i| i as f64 * 120.0 / 39.0).collect();
    let mut t_errs = Vec::with_capacity(100);
    for s in 0..100u64 {
        let ps =
            generate_decay_curve(CurveKind::ExpDecay, &t1_truth, &ts, Shots::Finite(1000), s)
                .unwrap();
        let fit = fit_exp_decay(&ts, &ps).unwrap();
        t_errs.push((fit.param("T").unwrap() - 40.0).abs() / 40.0);
    }
    let med = median(t_errs);
    assert!(med <= 0.02, "T1 median relative error {med}");

    // Ramsey: median relative T2 error <= 5%.
    let w = std::f64::consts::TAU * 0.25;
    let ramsey_truth = [0.5, 0.5, 4.0, w, 0.0];
    let ts: Vec<f64> = (0..64).map(|i| i as f64 * 16.0 / 63.0).collect();
    let mut t2_errs = Vec::with_capacity(100);
    for s in 0..100u64 {
        let ps = generate_decay_curve(
            CurveKind::Ramsey,
            &ramsey_truth,
            &ts,
            Shots::Finite(1000),
            1000 + s,
        )
        .unwrap();
        let fit = fit_ramsey(&ts, &ps).unwrap();
        t2_errs.push((fit.param("T").unwrap() - 4.0).abs() / 4.0);
    }
    let med = median(t2_errs);
    assert!(med <= 0.05, "Ramsey median relative T2 error {med}");

    // RB: median absolute p error <= 0.001.
    let rb_truth = [0.5, 0.5, 0.9966];
    let ms: Vec<f64> = [1u32, 2, 4, 8, 16, 32, 64, 128, 256, 512]
        .iter()
        .map(|&m| m as f64)
        .collect();
    let mut p_errs = Vec::with_capacity(100);
    for s in 0..100u64 {
        let ps = generate_decay_curve(
            CurveKind::RbDecay,
            &rb_truth,
            &ms,
            Shots::Finite(1000),
            2000 + s,
        )
        .unwrap();
        let fit = fit_rb_decay(&ms, &ps).unwrap();
        p_errs.push((fit.param("p").unwrap() - 0.9966).abs());
    }
    let med = median(p_errs);
    assert!(med <= 0.001, "RB median absolute p error {med}");

    // Analytic Jacobians match central finite differences to 1e-6.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let cases = [
        (CurveKind::ExpDecay, vec![0.85, 0.12, 37.0]),
        (CurveKind::Ramsey, vec![0.45, 0.52, 5.5, 1.3, 0.7]),
        (CurveKind::RbDecay, vec![0.48, 0.5, 0.993]),
    ];
    for (kind, params) in cases {
        for _ in 0..50 {
            let x = match kind {
                CurveKind::RbDecay => 1.0 + rng.random::<f64>() * 200.0,
                _ => rng.random::<f64>() * 20.0,
            };
            let analytic = model_jacobian(kind, &params, x);
            for i in 0..params.len() {
                let h = 1e-6 * params[i].abs().max(1e-3);
                let mut lo = params.clone();
                let mut hi = params.clone();
                lo[i] -= h;
                hi[i] += h;
                let fd = (model_value(kind, &hi, x) - model_value(kind, &lo, x)) / (2.0 * h);
                assert!(
                    (fd - analytic[i]).abs() <= 1e-6 * analytic[i].abs().max(1.0),
                    "{kind:?} param {i}: fd {fd} vs {}",
                    analytic[i]
                );
            }
        }
    }
    report(2, "fit-recovery", start, 30.0);
}

#[test]
fn criterion_3_acf_correctness() {
    let start = Instant::now();

    // AR(1) with rho = 0.5 at n = 10^4: r(1) and r(2) near the analytic
    // rho^l values.
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let rho: f64 = 0.5;
    let mut x = 0.0;
    let vals: Vec<f64> = (0..10_000)
        .map(|_| {
            x = rho * x + (1.0 - rho * rho).sqrt() * normal.sample(&mut rng);
            x
        })
        .collect();
    let r = acf(&series_of(&vals), 2).unwrap();
    assert!((r.values[1] - 0.50).abs() < 0.03, "r(1) = {}", r.values[1]);
    assert!((r.values[2] - 0.25).abs() < 0.03, "r(2) = {}", r.values[2]);

    // White noise, n = 250: at least 28 of 30 lags inside the 1.96/sqrt(n)
    // band on at least 90 of 100 seeds.
    let mut ok = 0;
    for i in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2_800_000 + i);
        let vals: Vec<f64> = (0..250).map(|_| normal.sample(&mut rng)).collect();
        let r = acf(&series_of(&vals), 30).unwrap();
        let inside = r.values[1..]
            .iter()
            .filter(|v| v.abs() < r.ci_halfwidth)
            .count();
        if inside >= 28 {
            ok += 1;
        }
    }
    assert!(ok >= 90, "band coverage held on only {ok}/100 seeds");
    report(3, "acf-correctness", start, 10.0);
}

#[test]
fn criterion_4_dependence_estimators() {
    let start = Instant::now();

    // Quadratic dependence: invisible to Pearson, visible to dcor and MI.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let xs: Vec<f64> = (0..2000).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let p = pearson(&xs, &ys).unwrap();
    assert!(p.abs() < 0.05, "pearson {p}");
    let d = distance_correlation(&xs, &ys).unwrap();
    assert!(d > 0.4, "dcor {d}");
    let mi = mutual_information(&xs, &ys, 8).unwrap();
    assert!(mi > 0.5, "MI {mi}");

    // Independence: both estimators near their floors.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let xs: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
    let ys: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
    let d = distance_correlation(&xs, &ys).unwrap();
    assert!(d < 0.08, "independent dcor {d}");
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let xs: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
    let ys: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
    let mi = mutual_information(&xs, &ys, 8).unwrap();
    assert!(mi < 0.02, "independent MI {mi}");

    // Streaming dcor equals the naive materialized double-centering.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let xs: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| (3.0 * x).sin() + 0.2 * rng.random::<f64>())
        .collect();
    let fast = distance_correlation(&xs, &ys).unwrap();
    let slow = naive_dcor(&xs, &ys);
    assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
    report(4, "dependence-estimators", start, 20.0);
}

fn naive_dcor(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let centered = |v: &[f64]| -> Vec<f64> {
        let mut d = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                d[j * n + k] = (v[j] - v[k]).abs();
            }
        }
        let rows: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|k| d[j * n + k]).sum::<f64>() / n as f64)
            .collect();
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

#[test]
fn criterion_5_clustering_oracle() {
    let start = Instant::now();
    let (sc, ds) = corpus();
    let planted = planted_labels();

    let emb = embed(
        &sc.topology,
        &EmbedParams {
            seed: CORPUS_SEED,
            ..EmbedParams::default()
        },
    )
    .unwrap();
    let features = qubit_features(&ds, &emb, (0, 249)).unwrap();

    for method in ClusterMethod::ALL {
        let a = run_method(&features, method, 2, None, CORPUS_SEED).unwrap();
        let ari = adjusted_rand_index(&a.labels, &planted).unwrap();
        assert!(ari >= 0.9, "{method:?} ARI {ari} vs planted families");
        let sel = select_k(&features, method, 2..=6, None, CORPUS_SEED).unwrap();
        assert_eq!(sel.k, 2, "{method:?} silhouette selected k = {}", sel.k);
    }

    // Concentric rings: spectral succeeds where kmeans cannot.
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for (ring, radius) in [(0usize, 1.0f64), (1, 5.0)] {
        for _ in 0..200 {
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let r = radius + 0.1 * (rng.random::<f64>() - 0.5);
            points.push(vec![r * theta.cos(), r * theta.sin()]);
            truth.push(ring);
        }
    }
    let sp = spectral(&points, 2, 0.5, 3).unwrap();
    assert_eq!(
        adjusted_rand_index(&sp.labels, &truth).unwrap(),
        1.0,
        "spectral rings"
    );
    let km = kmeans(&points, 2, 3).unwrap();
    let km_ari = adjusted_rand_index(&km.labels, &truth).unwrap();
    assert!(km_ari < 0.2, "kmeans rings ARI {km_ari}");
    report(5, "clustering-oracle", start, 60.0);
}

#[test]
fn criterion_6_generator_fidelity_to_published_statistics() {
    let start = Instant::now();
    let (_, ds) = corpus();

    let pooled_mean = |metric: MetricKind| -> f64 {
        let vals: Vec<f64> = ds
            .records()
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| r.value)
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    let checks = [
        (MetricKind::T1, 40.95, 1.0),
        (MetricKind::T2Star, 3.89, 0.5),
        (MetricKind::T2Echo, 17.7, 1.0),
        (MetricKind::ReadoutFidelity, 0.972, 0.005),
        (MetricKind::Fidelity1Q, 0.9983, 0.001),
        (MetricKind::Fidelity2Q, 0.9895, 0.003),
    ];
    for (metric, target, tol) in checks {
        let mean = pooled_mean(metric);
        assert!(
            (mean - target).abs() <= tol,
            "{metric} pooled mean {mean} vs {target} +- {tol}"
        );
    }

    // T2echo/T1 ratio: pooled mean near 0.44, every sample physical.
    let mut ratios = Vec::new();
    for q in 0..20u32 {
        let t1 = ds.series(TargetId::Qubit(q), MetricKind::T1);
        let t2e = ds.series(TargetId::Qubit(q), MetricKind::T2Echo);
        for (a, b) in t1.points.iter().zip(&t2e.points) {
            assert!(
                b.1 <= 2.0 * a.1,
                "q{q} day {}: T2echo {} above 2*T1 {}",
                a.0,
                b.1,
                a.1
            );
            let r = b.1 / a.1;
            if r <= 2.0 {
                ratios.push(r);
            }
        }
    }
    let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(
        (mean_ratio - 0.44).abs() <= 0.05,
        "pooled T2echo/T1 mean {mean_ratio}"
    );
    report(6, "generator-statistics", start, 10.0);
}

#[test]
fn criterion_7_correlation_block_structure() {
    let start = Instant::now();
    let (_, ds) = corpus();
    let window = (130, 209);
    let fid = [
        MetricKind::ReadoutFidelity,
        MetricKind::Fidelity1Q,
        MetricKind::Fidelity2Q,
    ];
    let coh = [MetricKind::T1, MetricKind::T2Star, MetricKind::T2Echo];
    for method in CorrMethod::ALL {
        let m = metric_correlation_matrix(&ds, method, window).unwrap();
        let mut min_fid = f64::INFINITY;
        for i in 0..3 {
            for j in (i + 1)..3 {
                min_fid = min_fid.min(m.get(fid[i], fid[j]).abs());
            }
        }
        let mut max_cross: f64 = 0.0;
        for &a in &fid {
            for &b in &coh {
                max_cross = max_cross.max(m.get(a, b).abs());
            }
        }
        assert!(
            min_fid > max_cross,
            "{method:?}: fidelity block min {min_fid} vs cross-block max {max_cross}"
        );
        // Coherence pair beats fidelity-coherence pair.
        let t1_t2e = m.get(MetricKind::T1, MetricKind::T2Echo).abs();
        let t1_fro = m.get(MetricKind::T1, MetricKind::ReadoutFidelity).abs();
        assert!(
            t1_t2e > t1_fro,
            "{method:?}: (T1,T2echo) {t1_t2e} vs (T1,FRO) {t1_fro}"
        );
    }
    report(7, "correlation-blocks", start, 10.0);
}

#[test]
fn criterion_8_ghz_validation_analogue() {
    let start = Instant::now();
    let (sc, ds) = corpus();
    let planted = planted_labels();
    let cfg = HealthConfig::default();

    // Stable-cluster GHZ mean beats the noisy cluster by >= 0.05 at k = 5.
    let emb = embed(
        &sc.topology,
        &EmbedParams {
            seed: CORPUS_SEED,
            ..EmbedParams::default()
        },
    )
    .unwrap();
    let features = qubit_features(&ds, &emb, (0, 249)).unwrap();
    let assignment =
        ClusterAssignment::from_labels(&features, planted.clone(), ClusterMethod::KMeans, 0)
            .unwrap();
    let rep = validate_clusters(&assignment, &ds, 5, (0, 249), &cfg).unwrap();
    assert_eq!(rep.per_cluster.len(), 2);
    let mean_of = |label: usize| {
        rep.per_cluster
            .iter()
            .find(|c| c.cluster == label)
            .map(|c| c.mean)
            .expect("cluster present")
    };
    let stable_mean = mean_of(0);
    let noisy_mean = mean_of(1);
    assert!(
        stable_mean - noisy_mean >= 0.05,
        "gap {} (stable {stable_mean}, noisy {noisy_mean})",
        stable_mean - noisy_mean
    );

    // recommend_subsets at k = 2 matches the exhaustive edge brute force.
    let recs = recommend_subsets(
        &ds,
        &sc.topology,
        2,
        30,
        (0, 249),
        &cfg,
        SearchMode::Exhaustive,
    )
    .unwrap();
    assert_eq!(recs.len(), 30);
    let mut brute: Vec<(Vec<u32>, f64)> = sc
        .topology
        .edges
        .iter()
        .map(|&(a, b)| {
            let f_ab = ghz_fidelity_estimate(&ds, &[a, b], (0, 249), &cfg).unwrap();
            let f_ba = ghz_fidelity_estimate(&ds, &[b, a], (0, 249), &cfg).unwrap();
            if f_ba > f_ab {
                (vec![b, a], f_ba)
            } else {
                (vec![a, b], f_ab)
            }
        })
        .collect();
    brute.sort_by(|x, y| {
        y.1.partial_cmp(&x.1).unwrap().then_with(|| {
            let mut sx = x.0.clone();
            sx.sort_unstable();
            let mut sy = y.0.clone();
            sy.sort_unstable();
            sx.cmp(&sy)
        })
    });
    for (r, (chain, score)) in recs.iter().zip(&brute) {
        assert_eq!(&r.qubits, chain);
        assert!((r.predicted_ghz_fidelity - score).abs() < 1e-12);
    }

    // The top recommendations at k = 5 stay inside the stable family.
    let top5 = recommend_subsets(
        &ds,
        &sc.topology,
        5,
        3,
        (0, 249),
        &cfg,
        SearchMode::Exhaustive,
    )
    .unwrap();
    for rec in &top5 {
        for q in &rec.qubits {
            assert!(
                !DEFAULT_NOISY_QUBITS.contains(q),
                "top-3 recommendation {:?} touches the noisy family",
                rec.qubits
            );
        }
    }
    report(8, "ghz-validation", start, 30.0);
}
