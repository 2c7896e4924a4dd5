//! Nonlinear least-squares fitting of calibration curve models and
//! closed-form fidelity/coherence extraction.
//!
//! Three curve models cover the standard characterization experiments:
//!
//! * `ExpDecay`   P(t) = A·exp(-t/T) + B        (relaxation, spin echo)
//! * `Ramsey`     P(t) = A·exp(-t/T)·cos(ωt+φ) + B
//! * `RbDecay`    P(m) = A·p^m + B              (randomized benchmarking)
//!
//! Fits minimize the unweighted sum of squared residuals with a damped
//! Gauss-Newton schedule: λ starts at 1e-3, grows 10x on a rejected step and
//! shrinks 10x on an accepted one. A fit converges when the relative
//! parameter step drops below 1e-8 within 200 iterations. Spin-echo curves
//! use the plain `ExpDecay` model; the refocusing pulse is part of the
//! experiment, not the fit function.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Cholesky, SymMatrix};

/// Curve model identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    ExpDecay,
    Ramsey,
    RbDecay,
}

impl CurveKind {
    pub fn n_params(self) -> usize {
        match self {
            CurveKind::ExpDecay => 3,
            CurveKind::Ramsey => 5,
            CurveKind::RbDecay => 3,
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            CurveKind::ExpDecay => &["A", "B", "T"],
            CurveKind::Ramsey => &["A", "B", "T", "omega", "phi"],
            CurveKind::RbDecay => &["A", "B", "p"],
        }
    }
}

/// Evaluate a model at one point.
pub fn model_value(kind: CurveKind, params: &[f64], x: f64) -> f64 {
    match kind {
        CurveKind::ExpDecay => {
            let (a, b, t) = (params[0], params[1], params[2]);
            a * (-x / t).exp() + b
        }
        CurveKind::Ramsey => {
            let (a, b, t, w, phi) = (params[0], params[1], params[2], params[3], params[4]);
            a * (-x / t).exp() * (w * x + phi).cos() + b
        }
        CurveKind::RbDecay => {
            let (a, b, p) = (params[0], params[1], params[2]);
            a * p.powf(x) + b
        }
    }
}

/// Analytic gradient of the model with respect to its natural parameters.
pub fn model_jacobian(kind: CurveKind, params: &[f64], x: f64) -> Vec<f64> {
    match kind {
        CurveKind::ExpDecay => {
            let (a, _, t) = (params[0], params[1], params[2]);
            let e = (-x / t).exp();
            vec![e, 1.0, a * x / (t * t) * e]
        }
        CurveKind::Ramsey => {
            let (a, _, t, w, phi) = (params[0], params[1], params[2], params[3], params[4]);
            let e = (-x / t).exp();
            let (s, c) = (w * x + phi).sin_cos();
            vec![e * c, 1.0, a * x / (t * t) * e * c, -a * x * e * s, -a * e * s]
        }
        CurveKind::RbDecay => {
            let (a, _, p) = (params[0], params[1], params[2]);
            let pm = p.powf(x);
            // d/dp p^x = x p^(x-1)
            vec![pm, 1.0, a * x * p.powf(x - 1.0)]
        }
    }
}

/// Estimated model parameters, their covariance, and goodness of fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub kind: CurveKind,
    pub params: Vec<f64>,
    /// Covariance over the natural parameters, row-major.
    pub covariance: Vec<Vec<f64>>,
    pub residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.kind
            .param_names()
            .iter()
            .position(|&n| n == name)
            .map(|i| self.params[i])
    }
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("x values must be strictly increasing")]
    NonIncreasingX,
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("input {name} = {value} out of domain: {constraint}")]
    OutOfDomain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
}

const MAX_ITERATIONS: usize = 200;
const REL_STEP_TOL: f64 = 1e-8;
const LAMBDA_INIT: f64 = 1e-3;

struct LmOutcome {
    params: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    residual_rms: f64,
    converged: bool,
    iterations: usize,
}

/// Damped Gauss-Newton on sum of squared residuals.
///
/// `jac_row` returns the model gradient at one x; `valid` filters candidate
/// steps (e.g. T must stay positive), a rejected candidate counts as a
/// rejected step. The returned optimum never has a larger SSR than the
/// initial guess.
fn levenberg_marquardt(
    xs: &[f64],
    ys: &[f64],
    init: Vec<f64>,
    eval: &dyn Fn(&[f64], f64) -> f64,
    jac_row: &dyn Fn(&[f64], f64) -> Vec<f64>,
    valid: &dyn Fn(&[f64]) -> bool,
) -> Result<LmOutcome, FitError> {
    let n = xs.len();
    let k = init.len();
    let ssr = |params: &[f64]| -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(&x, &y)| {
                let r = eval(params, x) - y;
                r * r
            })
            .sum()
    };

    let mut params = init;
    let mut current_ssr = ssr(&params);
    let mut lambda = LAMBDA_INIT;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=MAX_ITERATIONS {
        iterations = iter;
        // Normal equations: (JᵀJ + λ diag(JᵀJ)) δ = -Jᵀr
        let mut jtj = SymMatrix::zeros(k);
        let mut jtr = vec![0.0; k];
        for (&x, &y) in xs.iter().zip(ys) {
            let row = jac_row(&params, x);
            let r = eval(&params, x) - y;
            for i in 0..k {
                jtr[i] += row[i] * r;
                for j in i..k {
                    jtj.data[i * k + j] += row[i] * row[j];
                }
            }
        }
        for i in 0..k {
            for j in 0..i {
                jtj.data[i * k + j] = jtj.data[j * k + i];
            }
        }

        let mut damped = jtj.clone();
        for i in 0..k {
            let d = jtj.get(i, i);
            damped.data[i * k + i] = d + lambda * d.max(1e-12);
        }
        let step = match Cholesky::new(&damped) {
            Ok(ch) => ch.solve(&jtr.iter().map(|v| -v).collect::<Vec<_>>()),
            Err(_) => {
                return Err(FitError::DegenerateData(
                    "singular normal equations".to_string(),
                ))
            }
        };

        let candidate: Vec<f64> = params.iter().zip(&step).map(|(p, d)| p + d).collect();
        let accepted = valid(&candidate) && ssr(&candidate) <= current_ssr;
        if accepted {
            let step_norm: f64 = step.iter().map(|d| d * d).sum::<f64>().sqrt();
            let param_norm: f64 = params.iter().map(|p| p * p).sum::<f64>().sqrt();
            current_ssr = ssr(&candidate);
            params = candidate;
            lambda = (lambda / 10.0).max(1e-14);
            if step_norm <= REL_STEP_TOL * (param_norm + 1e-12) {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e14 {
                // Damping exhausted; no further float-representable progress.
                break;
            }
        }
    }

    let covariance = fit_covariance(xs, &params, jac_row, current_ssr, n, k);
    Ok(LmOutcome {
        params,
        covariance,
        residual_rms: (current_ssr / n as f64).sqrt(),
        converged,
        iterations,
    })
}

/// Parameter covariance at the optimum: SSR/(n-k) · (JᵀJ)⁻¹, zeros when the
/// normal matrix is singular.
fn fit_covariance(
    xs: &[f64],
    params: &[f64],
    jac_row: &dyn Fn(&[f64], f64) -> Vec<f64>,
    ssr: f64,
    n: usize,
    k: usize,
) -> Vec<Vec<f64>> {
    let mut jtj = SymMatrix::zeros(k);
    for &x in xs {
        let row = jac_row(params, x);
        for i in 0..k {
            for j in i..k {
                jtj.data[i * k + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            jtj.data[i * k + j] = jtj.data[j * k + i];
        }
    }
    let sigma2 = if n > k { ssr / (n - k) as f64 } else { 0.0 };
    let mut ridge = jtj.clone();
    ridge.add_diagonal(1e-12);
    match Cholesky::new(&ridge) {
        Ok(ch) => {
            let inv = ch.inverse();
            (0..k)
                .map(|i| (0..k).map(|j| sigma2 * inv.get(i, j)).collect())
                .collect()
        }
        Err(_) => vec![vec![0.0; k]; k],
    }
}

fn check_probabilities(ps: &[f64]) -> Result<(), FitError> {
    for &p in ps {
        if !(0.0..=1.0).contains(&p) {
            return Err(FitError::ProbabilityOutOfRange(p));
        }
    }
    Ok(())
}

fn check_increasing(xs: &[f64]) -> Result<(), FitError> {
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FitError::NonIncreasingX);
    }
    Ok(())
}

fn variance(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n
}

/// Fit A·exp(-t/T) + B to an excited-population decay curve.
///
/// Initializer: B = min(ps), A = max(ps) - B, T = span/3.
pub fn fit_exp_decay(ts: &[f64], ps: &[f64]) -> Result<FitResult, FitError> {
    if ts.len() < 4 || ts.len() != ps.len() {
        return Err(FitError::TooFewPoints {
            needed: 4,
            got: ts.len().min(ps.len()),
        });
    }
    check_increasing(ts)?;
    check_probabilities(ps)?;
    if variance(ps) == 0.0 {
        return Err(FitError::DegenerateData("constant probabilities".into()));
    }

    let b0 = ps.iter().cloned().fold(f64::INFINITY, f64::min);
    let a0 = ps.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - b0;
    let span = ts[ts.len() - 1] - ts[0];
    let t0 = span / 3.0;
    let init = vec![a0.max(1e-6), b0, t0];

    let out = levenberg_marquardt(
        ts,
        ps,
        init,
        &|p, x| model_value(CurveKind::ExpDecay, p, x),
        &|p, x| model_jacobian(CurveKind::ExpDecay, p, x),
        &|p| p[2] > 0.0,
    )?;
    Ok(FitResult {
        kind: CurveKind::ExpDecay,
        params: out.params,
        covariance: out.covariance,
        residual_rms: out.residual_rms,
        converged: out.converged,
        iterations: out.iterations,
    })
}

/// Fit A·exp(-t/T)·cos(ωt+φ) + B to a Ramsey fringe curve.
///
/// The initial ω comes from the dominant discrete-Fourier peak of the
/// linearly detrended data. When no peak rises above the leakage floor the
/// oscillation is undetectable and the result reports `converged = false`
/// instead of failing.
pub fn fit_ramsey(ts: &[f64], ps: &[f64]) -> Result<FitResult, FitError> {
    if ts.len() < 8 || ts.len() != ps.len() {
        return Err(FitError::TooFewPoints {
            needed: 8,
            got: ts.len().min(ps.len()),
        });
    }
    check_increasing(ts)?;
    check_probabilities(ps)?;
    if variance(ps) == 0.0 {
        return Err(FitError::DegenerateData("constant probabilities".into()));
    }

    let n = ts.len();
    let span = ts[n - 1] - ts[0];

    // Linear detrend, then scan DFT bins k/span for the dominant component.
    let tbar = ts.iter().sum::<f64>() / n as f64;
    let ybar = ps.iter().sum::<f64>() / n as f64;
    let slope_num: f64 = ts.iter().zip(ps).map(|(&t, &y)| (t - tbar) * (y - ybar)).sum();
    let slope_den: f64 = ts.iter().map(|&t| (t - tbar) * (t - tbar)).sum();
    let slope = if slope_den > 0.0 { slope_num / slope_den } else { 0.0 };
    let detrended: Vec<f64> = ts
        .iter()
        .zip(ps)
        .map(|(&t, &y)| y - (ybar + slope * (t - tbar)))
        .collect();

    let k_max = (n / 2).max(2);
    let mut power = vec![0.0; k_max + 1];
    let mut phase_re = vec![0.0; k_max + 1];
    let mut phase_im = vec![0.0; k_max + 1];
    for k in 1..=k_max {
        let w = 2.0 * std::f64::consts::PI * k as f64 / span;
        let (mut re, mut im) = (0.0, 0.0);
        for (&t, &y) in ts.iter().zip(&detrended) {
            let (s, c) = (w * (t - ts[0])).sin_cos();
            re += y * c;
            im -= y * s;
        }
        power[k] = re * re + im * im;
        phase_re[k] = re;
        phase_im[k] = im;
    }
    let k_star = (1..=k_max)
        .max_by(|&a, &b| power[a].partial_cmp(&power[b]).expect("finite power"))
        .unwrap();
    let mut others: Vec<f64> = (1..=k_max).filter(|&k| k != k_star).map(|k| power[k]).collect();
    others.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_other = others[others.len() / 2];
    let peak_ok = power[k_star] > 4.0 * median_other.max(1e-300)
        && (k_star > 1 || power[1] > 8.0 * power[2]);

    let b0 = ybar;
    let a0 = (2.0 * power[k_star].sqrt() / n as f64).max(1e-6);
    let w0 = 2.0 * std::f64::consts::PI * k_star as f64 / span;
    let phi0 = phase_im[k_star].atan2(phase_re[k_star]);
    // The scan used t - ts[0]; shift the phase back to absolute time.
    let phi0 = phi0 - w0 * ts[0];
    let init = vec![a0, b0, span / 3.0, w0, phi0];

    if !peak_ok {
        // No detectable oscillation: report non-convergence with the best
        // available initialization, never an error.
        let rms = (ts
            .iter()
            .zip(ps)
            .map(|(&t, &y)| {
                let r = model_value(CurveKind::Ramsey, &init, t) - y;
                r * r
            })
            .sum::<f64>()
            / n as f64)
            .sqrt();
        return Ok(FitResult {
            kind: CurveKind::Ramsey,
            params: init,
            covariance: vec![vec![0.0; 5]; 5],
            residual_rms: rms,
            converged: false,
            iterations: 0,
        });
    }

    let out = levenberg_marquardt(
        ts,
        ps,
        init,
        &|p, x| model_value(CurveKind::Ramsey, p, x),
        &|p, x| model_jacobian(CurveKind::Ramsey, p, x),
        &|p| p[2] > 0.0 && p[3] > 0.0,
    )?;
    Ok(FitResult {
        kind: CurveKind::Ramsey,
        params: out.params,
        covariance: out.covariance,
        residual_rms: out.residual_rms,
        converged: out.converged,
        iterations: out.iterations,
    })
}

/// Fit A·p^m + B to a randomized-benchmarking survival curve.
///
/// p is constrained to (0, 1] through a logistic reparameterization; the
/// reported covariance is mapped back to p by the delta method. Initializer:
/// B = last value, A = first - B, p from a log-linear regression of (ps - B).
/// A flat curve is the no-decay identity case and returns p = 1 directly.
pub fn fit_rb_decay(ms: &[f64], ps: &[f64]) -> Result<FitResult, FitError> {
    let mut distinct = ms.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 4 || ms.len() != ps.len() {
        return Err(FitError::TooFewPoints {
            needed: 4,
            got: distinct.len(),
        });
    }
    if ms.iter().any(|&m| m < 1.0) {
        return Err(FitError::OutOfDomain {
            name: "m",
            value: *ms.iter().find(|&&m| m < 1.0).unwrap(),
            constraint: "sequence lengths must be >= 1",
        });
    }
    check_increasing(ms)?;
    check_probabilities(ps)?;

    if variance(ps) == 0.0 {
        // No decay at all: boundary case p = 1 fits exactly with A = 0.
        return Ok(FitResult {
            kind: CurveKind::RbDecay,
            params: vec![0.0, ps[0], 1.0],
            covariance: vec![vec![0.0; 3]; 3],
            residual_rms: 0.0,
            converged: true,
            iterations: 0,
        });
    }

    let b0 = ps[ps.len() - 1];
    let a0 = ps[0] - b0;
    // Log-linear regression of (ps - B) over m gives the initial decay rate.
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut cnt = 0.0;
    for (&m, &p) in ms.iter().zip(ps) {
        let d = (p - b0) / if a0 != 0.0 { a0 } else { 1.0 };
        if d > 1e-12 {
            let ln = d.ln();
            sx += m;
            sy += ln;
            sxx += m * m;
            sxy += m * ln;
            cnt += 1.0;
        }
    }
    let p0 = if cnt >= 2.0 && (cnt * sxx - sx * sx) > 0.0 {
        ((cnt * sxy - sx * sy) / (cnt * sxx - sx * sx)).exp()
    } else {
        0.99
    };
    let p0 = p0.clamp(1e-6, 1.0 - 1e-9);

    // Optimize in logit space so p stays in (0, 1).
    let logit = |p: f64| (p / (1.0 - p)).ln();
    let sigmoid = |t: f64| 1.0 / (1.0 + (-t).exp());
    let to_nat = |q: &[f64]| vec![q[0], q[1], sigmoid(q[2].clamp(-40.0, 40.0))];
    let init = vec![if a0 != 0.0 { a0 } else { 1e-3 }, b0, logit(p0)];

    let out = levenberg_marquardt(
        ms,
        ps,
        init,
        &|q, x| model_value(CurveKind::RbDecay, &to_nat(q), x),
        &|q, x| {
            let nat = to_nat(q);
            let mut row = model_jacobian(CurveKind::RbDecay, &nat, x);
            let p = nat[2];
            row[2] *= p * (1.0 - p); // chain rule through the logistic
            row
        },
        &|_| true,
    )?;

    let nat = to_nat(&out.params);
    let dp = nat[2] * (1.0 - nat[2]);
    let mut covariance = out.covariance;
    for j in 0..3 {
        covariance[2][j] *= dp;
        covariance[j][2] *= dp;
    }
    Ok(FitResult {
        kind: CurveKind::RbDecay,
        params: nat,
        covariance,
        residual_rms: out.residual_rms,
        converged: out.converged,
        iterations: out.iterations,
    })
}

/// Average single-qubit gate fidelity from the RB decay rate: (1+p)/2.
pub fn fidelity_1q(p: f64) -> Result<f64, FitError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(FitError::OutOfDomain {
            name: "p",
            value: p,
            constraint: "p in [0, 1]",
        });
    }
    Ok((1.0 + p) / 2.0)
}

/// Two-qubit gate fidelity from the interleaved-RB decay rate: (1+3p)/4.
pub fn fidelity_2q(p: f64) -> Result<f64, FitError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(FitError::OutOfDomain {
            name: "p",
            value: p,
            constraint: "p in [0, 1]",
        });
    }
    Ok((1.0 + 3.0 * p) / 4.0)
}

/// Readout fidelity from correct-assignment probabilities: (P(0|0)+P(1|1))/2.
pub fn readout_fidelity(p00: f64, p11: f64) -> Result<f64, FitError> {
    for (name, v) in [("p00", p00), ("p11", p11)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(FitError::OutOfDomain {
                name: if name == "p00" { "p00" } else { "p11" },
                value: v,
                constraint: "probability in [0, 1]",
            });
        }
    }
    Ok((p00 + p11) / 2.0)
}

/// Pure dephasing time from 1/T2 = 1/(2 T1) + 1/Tφ.
///
/// Returns `None` when t2 >= 2·t1, where the relaxation contribution already
/// accounts for all observed dephasing and Tφ is unphysical.
pub fn pure_dephasing_time(t1: f64, t2: f64) -> Result<Option<f64>, FitError> {
    for (name, v) in [("t1", t1), ("t2", t2)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(FitError::OutOfDomain {
                name: if name == "t1" { "t1" } else { "t2" },
                value: v,
                constraint: "time must be positive",
            });
        }
    }
    let inv = 1.0 / t2 - 1.0 / (2.0 * t1);
    if inv <= 0.0 {
        Ok(None)
    } else {
        Ok(Some(1.0 / inv))
    }
}

/// T2echo/T1 ratio, omitting unphysical values above 2.0.
pub fn t2_over_t1(t1: f64, t2echo: f64) -> Result<Option<f64>, FitError> {
    if !(t1 > 0.0 && t1.is_finite()) {
        return Err(FitError::OutOfDomain {
            name: "t1",
            value: t1,
            constraint: "time must be positive",
        });
    }
    if !(t2echo > 0.0 && t2echo.is_finite()) {
        return Err(FitError::OutOfDomain {
            name: "t2echo",
            value: t2echo,
            constraint: "time must be positive",
        });
    }
    let ratio = t2echo / t1;
    Ok(if ratio <= 2.0 { Some(ratio) } else { None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn exp_decay_recovers_exact_model() {
        let truth = [0.9, 0.1, 40.0];
        let ts = linspace(0.0, 120.0, 20);
        let ps: Vec<f64> = ts
            .iter()
            .map(|&t| model_value(CurveKind::ExpDecay, &truth, t))
            .collect();
        let fit = fit_exp_decay(&ts, &ps).unwrap();
        assert!(fit.converged);
        for (est, tru) in fit.params.iter().zip(truth) {
            assert!(
                ((est - tru) / tru).abs() < 1e-6,
                "param {est} vs {tru}, fit {fit:?}"
            );
        }
        // Refit at the optimum reproduces the optimum (noiseless fixed point).
        let ps2: Vec<f64> = ts
            .iter()
            .map(|&t| model_value(CurveKind::ExpDecay, &fit.params, t).clamp(0.0, 1.0))
            .collect();
        let fit2 = fit_exp_decay(&ts, &ps2).unwrap();
        for (a, b) in fit.params.iter().zip(&fit2.params) {
            assert!(((a - b) / a).abs() < 1e-6);
        }
    }

    #[test]
    fn exp_decay_rejects_constant_data() {
        let ts = linspace(0.0, 10.0, 6);
        let ps = vec![0.5; 6];
        assert!(matches!(
            fit_exp_decay(&ts, &ps).unwrap_err(),
            FitError::DegenerateData(_)
        ));
    }

    #[test]
    fn exp_decay_rejects_too_few_points() {
        assert!(matches!(
            fit_exp_decay(&[0.0, 1.0, 2.0], &[1.0, 0.5, 0.3]).unwrap_err(),
            FitError::TooFewPoints { needed: 4, .. }
        ));
    }

    #[test]
    fn ramsey_recovers_exact_model() {
        let w = 2.0 * std::f64::consts::PI * 0.25;
        let truth = [0.5, 0.5, 4.0, w, 0.0];
        let ts = linspace(0.0, 16.0, 64);
        let ps: Vec<f64> = ts
            .iter()
            .map(|&t| model_value(CurveKind::Ramsey, &truth, t))
            .collect();
        let fit = fit_ramsey(&ts, &ps).unwrap();
        assert!(fit.converged);
        for (i, (est, tru)) in fit.params.iter().zip(truth).enumerate() {
            if tru.abs() > 0.0 {
                assert!(
                    ((est - tru) / tru).abs() < 1e-6,
                    "param {i}: {est} vs {tru}"
                );
            } else {
                assert!(est.abs() < 1e-6, "param {i}: {est} vs 0");
            }
        }
    }

    #[test]
    fn ramsey_evaluates_known_point() {
        // 0.5 + 0.5·e^{-1}·cos(2π) at t = 4 with T = 4, ω = 2π·0.25.
        let w = 2.0 * std::f64::consts::PI * 0.25;
        let v = model_value(CurveKind::Ramsey, &[0.5, 0.5, 4.0, w, 0.0], 4.0);
        let expected = 0.5 + 0.5 * (-1.0f64).exp();
        assert!((v - expected).abs() < 1e-12);
        assert!((expected - 0.6839).abs() < 1e-4);
    }

    #[test]
    fn ramsey_without_oscillation_reports_nonconvergence() {
        // ω·span = 0.1 « 1: indistinguishable from smooth drift.
        let w = 0.1 / 16.0;
        let truth = [0.5, 0.5, 40.0, w, 0.0];
        let ts = linspace(0.0, 16.0, 64);
        let ps: Vec<f64> = ts
            .iter()
            .map(|&t| model_value(CurveKind::Ramsey, &truth, t))
            .collect();
        let fit = fit_ramsey(&ts, &ps).unwrap();
        assert!(!fit.converged);
    }

    #[test]
    fn rb_recovers_exact_model() {
        let truth = [0.5, 0.5, 0.9966];
        let ms: Vec<f64> = [1u32, 2, 4, 8, 16, 32, 64, 128, 256, 512]
            .iter()
            .map(|&m| m as f64)
            .collect();
        let ps: Vec<f64> = ms
            .iter()
            .map(|&m| model_value(CurveKind::RbDecay, &truth, m))
            .collect();
        let fit = fit_rb_decay(&ms, &ps).unwrap();
        assert!(fit.converged);
        let p = fit.param("p").unwrap();
        assert!(((p - 0.9966) / 0.9966).abs() < 1e-6, "p = {p}");
    }

    #[test]
    fn rb_flat_curve_returns_unit_p() {
        let ms: Vec<f64> = vec![1.0, 2.0, 4.0, 8.0];
        let ps = vec![1.0; 4];
        let fit = fit_rb_decay(&ms, &ps).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.param("p").unwrap(), 1.0);
        assert_eq!(fit.residual_rms, 0.0);
    }

    #[test]
    fn rb_requires_distinct_lengths() {
        let ms = vec![1.0, 1.0, 1.0, 1.0, 2.0];
        let ps = vec![0.9, 0.9, 0.9, 0.9, 0.8];
        assert!(matches!(
            fit_rb_decay(&ms, &ps).unwrap_err(),
            FitError::TooFewPoints { .. }
        ));
    }

    #[test]
    fn jacobians_match_central_differences() {
        let cases = [
            (CurveKind::ExpDecay, vec![0.85, 0.12, 37.0]),
            (
                CurveKind::Ramsey,
                vec![0.45, 0.52, 5.5, 1.3, 0.7],
            ),
            (CurveKind::RbDecay, vec![0.48, 0.5, 0.993]),
        ];
        let mut rng = crate::seed::rng(41, &[0xfd]);
        use rand::Rng;
        for (kind, params) in cases {
            for _ in 0..25 {
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
                    let fd =
                        (model_value(kind, &hi, x) - model_value(kind, &lo, x)) / (2.0 * h);
                    let scale = analytic[i].abs().max(1.0);
                    assert!(
                        (fd - analytic[i]).abs() <= 1e-6 * scale,
                        "{kind:?} param {i} at x={x}: fd {fd} vs analytic {}",
                        analytic[i]
                    );
                }
            }
        }
    }

    #[test]
    fn monotone_damping_never_worsens_residual() {
        // Mild noise, bad-ish initializer territory: final SSR must not exceed
        // the initializer's SSR.
        let truth = [0.9, 0.1, 40.0];
        let ts = linspace(0.0, 120.0, 20);
        let mut rng = crate::seed::rng(5, &[0xab]);
        use rand::Rng;
        let ps: Vec<f64> = ts
            .iter()
            .map(|&t| {
                (model_value(CurveKind::ExpDecay, &truth, t) + 0.02 * (rng.random::<f64>() - 0.5))
                    .clamp(0.0, 1.0)
            })
            .collect();
        let b0 = ps.iter().cloned().fold(f64::INFINITY, f64::min);
        let a0 = ps.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - b0;
        let init = [a0, b0, 40.0];
        let init_ssr: f64 = ts
            .iter()
            .zip(&ps)
            .map(|(&t, &y)| {
                let r = model_value(CurveKind::ExpDecay, &init, t) - y;
                r * r
            })
            .sum();
        let fit = fit_exp_decay(&ts, &ps).unwrap();
        let final_ssr = fit.residual_rms * fit.residual_rms * ts.len() as f64;
        assert!(final_ssr <= init_ssr + 1e-12);
    }

    #[test]
    fn closed_forms_match_known_values() {
        assert_eq!(fidelity_1q(1.0).unwrap(), 1.0);
        assert!((fidelity_1q(0.9966).unwrap() - 0.9983).abs() < 1e-12);
        assert_eq!(fidelity_1q(0.0).unwrap(), 0.5);
        assert_eq!(fidelity_2q(1.0).unwrap(), 1.0);
        assert!((fidelity_2q(0.986).unwrap() - 0.9895).abs() < 1e-12);
        assert_eq!(fidelity_2q(0.0).unwrap(), 0.25);
        assert_eq!(readout_fidelity(1.0, 1.0).unwrap(), 1.0);
        assert!((readout_fidelity(0.98, 0.964).unwrap() - 0.972).abs() < 1e-12);
        assert_eq!(readout_fidelity(0.5, 0.5).unwrap(), 0.5);
        assert!(fidelity_1q(1.1).is_err());
        assert!(fidelity_2q(-0.1).is_err());
        assert!(readout_fidelity(1.2, 0.5).is_err());
    }

    #[test]
    fn fidelities_increase_in_p_and_readout_is_symmetric() {
        let mut prev1 = 0.0;
        let mut prev2 = 0.0;
        for i in 0..=100 {
            let p = i as f64 / 100.0;
            let f1 = fidelity_1q(p).unwrap();
            let f2 = fidelity_2q(p).unwrap();
            if i > 0 {
                assert!(f1 > prev1);
                assert!(f2 > prev2);
            }
            prev1 = f1;
            prev2 = f2;
        }
        assert_eq!(
            readout_fidelity(0.91, 0.87).unwrap(),
            readout_fidelity(0.87, 0.91).unwrap()
        );
    }

    #[test]
    fn pure_dephasing_matches_arithmetic() {
        // 1/(1/17.7 - 1/80)
        let t = pure_dephasing_time(40.0, 17.7).unwrap().unwrap();
        assert!((t - 22.728).abs() < 1e-2, "{t}");
        assert_eq!(pure_dephasing_time(40.0, 80.0).unwrap(), None);
        assert_eq!(pure_dephasing_time(40.0, 100.0).unwrap(), None);
        assert!(pure_dephasing_time(-1.0, 10.0).is_err());
    }

    #[test]
    fn ratio_omits_above_two() {
        let r = t2_over_t1(40.0, 17.6).unwrap().unwrap();
        assert!((r - 0.44).abs() < 1e-12);
        assert_eq!(t2_over_t1(40.0, 80.0).unwrap(), Some(2.0));
        assert_eq!(t2_over_t1(40.0, 96.0).unwrap(), None);
        assert!(t2_over_t1(0.0, 10.0).is_err());
    }
}
