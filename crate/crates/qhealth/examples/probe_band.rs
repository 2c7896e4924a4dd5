use qhealth::caldata::{MetricKind, TargetId};
use qhealth::tempstats::acf;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn main() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    for base in 0..40u64 {
        let mut ok = 0;
        for i in 0..100u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(base * 100_000 + i);
            let vals: Vec<f64> = (0..250).map(|_| normal.sample(&mut rng)).collect();
            let series = qhealth::caldata::MetricSeries {
                target: Some(TargetId::Qubit(0)),
                metric: MetricKind::T1,
                points: vals.iter().enumerate().map(|(d, &v)| (d as u32, v)).collect(),
            };
            let r = acf(&series, 30).unwrap();
            let inside = r.values[1..].iter().filter(|v| v.abs() < r.ci_halfwidth).count();
            if inside >= 28 { ok += 1; }
        }
        println!("base {base}: {ok}/100");
    }
}
