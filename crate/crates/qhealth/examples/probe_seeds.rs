use qhealth::caldata::MetricKind;
use qhealth::synthdev::{default_scenario, generate_corpus};
use qhealth::xcorr::{metric_correlation_matrix, CorrMethod};

fn main() {
    let fid = [MetricKind::ReadoutFidelity, MetricKind::Fidelity1Q, MetricKind::Fidelity2Q];
    let coh = [MetricKind::T1, MetricKind::T2Star, MetricKind::T2Echo];
    for seed in 0..12u64 {
        let ds = generate_corpus(&default_scenario(seed)).unwrap();
        let mut line = format!("seed {seed:>2}:");
        let mut all_ok = true;
        for method in CorrMethod::ALL {
            let m = metric_correlation_matrix(&ds, method, (130, 209)).unwrap();
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
            let t1t2e = m.get(MetricKind::T1, MetricKind::T2Echo).abs();
            let t1fro = m.get(MetricKind::T1, MetricKind::ReadoutFidelity).abs();
            let ok = min_fid > max_cross && t1t2e > t1fro;
            all_ok &= ok;
            line += &format!("  {}:{:.2}/{:.2}{}", method.code(), min_fid, max_cross, if ok {"+"} else {"!"});
        }
        // pooled means
        let mut means = String::new();
        for (metric, target, tol) in [
            (MetricKind::T1, 40.95, 1.0), (MetricKind::T2Star, 3.89, 0.5), (MetricKind::T2Echo, 17.7, 1.0),
            (MetricKind::ReadoutFidelity, 0.972, 0.005), (MetricKind::Fidelity1Q, 0.9983, 0.001), (MetricKind::Fidelity2Q, 0.9895, 0.003),
        ] {
            let vals: Vec<f64> = ds.records().iter().filter(|r| r.metric == metric).map(|r| r.value).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            if (mean - target).abs() > tol { means += &format!(" {metric} {mean:.4} OUT"); all_ok = false; }
        }
        println!("{line}{means}  => {}", if all_ok {"OK"} else {"FAIL"});
    }
}
