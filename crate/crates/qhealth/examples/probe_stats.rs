use qhealth::caldata::{MetricKind, TargetId};
use qhealth::synthdev::{default_scenario, generate_corpus};

fn main() {
    for seed in [7u64, 19, 42] {
        let sc = default_scenario(seed);
        let ds = generate_corpus(&sc).unwrap();
        println!("== seed {seed} ==");
        for metric in MetricKind::ALL {
            let vals: Vec<f64> = ds.records().iter().filter(|r| r.metric == metric).map(|r| r.value).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            let skew = vals.iter().map(|v| ((v - mean) / std).powi(3)).sum::<f64>() / n;
            println!("{metric}: mean {mean:.5} std {std:.5} skew {skew:.3}");
        }
        // t2e/t1 ratio pooled (omit >2)
        let mut ratios = Vec::new();
        for q in 0..20u32 {
            let t1 = ds.series(TargetId::Qubit(q), MetricKind::T1);
            let t2e = ds.series(TargetId::Qubit(q), MetricKind::T2Echo);
            for (a, b) in t1.points.iter().zip(&t2e.points) {
                let r = b.1 / a.1;
                if r <= 2.0 { ratios.push(r); }
            }
        }
        let rmean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        println!("t2e/t1 pooled mean {rmean:.4} (n={})", ratios.len());
        // per-qubit T1 ACF(1) mean
        let mut acfs = Vec::new();
        for q in 0..20u32 {
            let s = ds.series(TargetId::Qubit(q), MetricKind::T1);
            let v = s.values();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let denom: f64 = v.iter().map(|x| (x - m).powi(2)).sum();
            let num: f64 = v.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
            acfs.push(num / denom);
        }
        println!("T1 acf(1) mean {:.4}", acfs.iter().sum::<f64>() / 20.0);
    }
}
