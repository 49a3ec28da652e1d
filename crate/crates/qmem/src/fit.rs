//! Damped least-squares fitting and bootstrap error analysis.
//!
//! One Levenberg-Marquardt core drives every fit in the crate: the decay
//! models of the measurement protocols and the resonator circle refinement.
//! Jacobians are numeric (central differences); convergence demands a
//! gradient norm below 1e-10.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("insufficient data: {points} points for {params} parameters")]
    InsufficientData { points: usize, params: usize },
    #[error("rank-deficient Jacobian at iteration {0}")]
    RankDeficient(usize),
    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Raw optimizer output.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub params: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// One reported fit parameter with its 68% bootstrap interval.
#[derive(Debug, Clone, Serialize)]
pub struct FitParam {
    pub name: String,
    pub unit: String,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// A labeled fit report; what the protocols return and the CLI serializes.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub model: String,
    pub params: Vec<FitParam>,
    pub residual_norm: f64,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// Solve the square real system a x = b by Gaussian elimination with partial
/// pivoting. Returns None if the pivot collapses (rank deficiency).
fn solve_real(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}

const MAX_ITERATIONS: usize = 400;
const GRADIENT_TOL: f64 = 1e-10;

/// Levenberg-Marquardt on residuals r_i = y_i - model(p, x_i).
pub fn levenberg_marquardt<F>(
    model: F,
    xs: &[f64],
    ys: &[f64],
    p0: &[f64],
) -> Result<FitOutput, FitError>
where
    F: Fn(&[f64], f64) -> f64,
{
    let n = xs.len();
    let m = p0.len();
    if n != ys.len() {
        return Err(FitError::InvalidInput("x/y length mismatch".into()));
    }
    if n < 3 * m {
        return Err(FitError::InsufficientData { points: n, params: m });
    }
    let residuals = |p: &[f64]| -> Vec<f64> {
        xs.iter().zip(ys).map(|(&x, &y)| y - model(p, x)).collect()
    };
    let sq = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();

    let mut p = p0.to_vec();
    let mut r = residuals(&p);
    let mut cost = sq(&r);
    let mut lambda = 1e-3;
    let mut grad_norm = f64::INFINITY;

    for iter in 0..MAX_ITERATIONS {
        // numeric Jacobian of the *model*, J[i][j] = d model / d p_j at x_i
        let mut jac = vec![vec![0.0; m]; n];
        for j in 0..m {
            let h = 1e-6 * p[j].abs().max(1e-3);
            let mut pp = p.clone();
            pp[j] += h;
            let mut pm = p.clone();
            pm[j] -= h;
            for i in 0..n {
                jac[i][j] = (model(&pp, xs[i]) - model(&pm, xs[i])) / (2.0 * h);
            }
        }
        // normal equations: (JtJ + lambda diag(JtJ)) delta = Jt r
        let mut jtj = vec![vec![0.0; m]; m];
        let mut jtr = vec![0.0; m];
        for i in 0..n {
            for j in 0..m {
                jtr[j] += jac[i][j] * r[i];
                for k in 0..m {
                    jtj[j][k] += jac[i][j] * jac[i][k];
                }
            }
        }
        // gradient of the cost is -2 Jt r; use a scale-aware norm
        let y_scale = ys.iter().map(|v| v.abs()).fold(0.0f64, f64::max).max(1e-30);
        grad_norm = jtr
            .iter()
            .enumerate()
            .map(|(j, g)| (g * p[j].abs().max(1.0)).abs())
            .fold(0.0, f64::max)
            / (y_scale * y_scale);
        if grad_norm < GRADIENT_TOL {
            return Ok(FitOutput { params: p, residual_norm: cost.sqrt(), iterations: iter });
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj.clone();
            for j in 0..m {
                damped[j][j] += lambda * jtj[j][j].max(1e-30);
            }
            let Some(delta) = solve_real(damped, jtr.clone()) else {
                return Err(FitError::RankDeficient(iter));
            };
            let cand: Vec<f64> = p.iter().zip(&delta).map(|(a, d)| a + d).collect();
            let rc = residuals(&cand);
            let cc = sq(&rc);
            if cc.is_finite() && cc < cost {
                p = cand;
                r = rc;
                cost = cc;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            // damping saturated: treat as converged if the gradient is tiny
            if grad_norm < 1e-6 {
                return Ok(FitOutput { params: p, residual_norm: cost.sqrt(), iterations: iter });
            }
            return Err(FitError::NonConvergence { iterations: iter, gradient_norm: grad_norm });
        }
    }
    Err(FitError::NonConvergence { iterations: MAX_ITERATIONS, gradient_norm: grad_norm })
}

/// Residual-resampling bootstrap: refit on y* = model(p) + resampled
/// residuals, report 16th/84th percentiles per parameter.
pub fn bootstrap_ci<F>(
    model: F,
    xs: &[f64],
    ys: &[f64],
    fitted: &FitOutput,
    resamples: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>, FitError>
where
    F: Fn(&[f64], f64) -> f64 + Sync,
{
    let n = xs.len();
    let yhat: Vec<f64> = xs.iter().map(|&x| model(&fitted.params, x)).collect();
    let resid: Vec<f64> = ys.iter().zip(&yhat).map(|(y, f)| y - f).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let ystar: Vec<f64> = (0..n)
            .map(|i| yhat[i] + resid[rng.gen_range(0..n)])
            .collect();
        if let Ok(out) = levenberg_marquardt(&model, xs, &ystar, &fitted.params) {
            samples.push(out.params);
        }
    }
    if samples.len() < resamples / 2 {
        return Err(FitError::NonConvergence {
            iterations: resamples,
            gradient_norm: f64::NAN,
        });
    }
    let m = fitted.params.len();
    let mut intervals = Vec::with_capacity(m);
    for j in 0..m {
        let mut col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
        col.sort_by(|a, b| a.total_cmp(b));
        let pick = |q: f64| col[((col.len() - 1) as f64 * q).round() as usize];
        let (mut lo, mut hi) = (pick(0.16), pick(0.84));
        // percentile intervals can exclude the point estimate on skewed
        // small-sample distributions; widen so the invariant holds
        lo = lo.min(fitted.params[j]);
        hi = hi.max(fitted.params[j]);
        intervals.push((lo, hi));
    }
    Ok(intervals)
}

/// y = a exp(-x / tau) + c  with parameters [a, tau, c].
pub fn exponential_model(p: &[f64], x: f64) -> f64 {
    p[0] * (-x / p[1]).exp() + p[2]
}

/// y = a exp(-nbar exp(-kappa x)) + c  with parameters [a, nbar, kappa, c];
/// the vacuum-return shape of a decaying coherent state.
pub fn exp_of_exp_model(p: &[f64], x: f64) -> f64 {
    p[0] * (-p[1] * (-p[2] * x).exp()).exp() + p[3]
}

/// y = a exp(-x/T2) cos(omega x + phi) + 0.5 + b exp(-x/tau_b)
/// with parameters [a, t2, omega, phi, b, tau_b]; a decaying fringe over a
/// baseline relaxing toward the dephased level 0.5.
pub fn decaying_sinusoid_model(p: &[f64], x: f64) -> f64 {
    p[0] * (-x / p[1]).exp() * (p[2] * x + p[3]).cos() + 0.5 + p[4] * (-x / p[5]).exp()
}

/// Log-linear regression seed for the exponential model.
pub fn guess_exponential(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let c = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let floor = c - 1e-12;
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y - floor > 1e-12)
        .map(|(&x, &y)| (x, (y - floor).ln()))
        .collect();
    let n = pts.len().max(2) as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let slope = if denom.abs() > 1e-30 { (n * sxy - sx * sy) / denom } else { -1.0 };
    let intercept = (sy - slope * sx) / n;
    let tau = if slope < 0.0 { -1.0 / slope } else { xs.last().copied().unwrap_or(1.0) };
    vec![intercept.exp(), tau, floor]
}

/// Periodogram seed for the fringe frequency: scan omega over the band the
/// sampling supports and keep the strongest spectral response.
pub fn guess_fringe_frequency(xs: &[f64], ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let span = xs.last().unwrap() - xs.first().unwrap();
    let min_spacing = xs
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
        .max(1e-12);
    let omega_max = std::f64::consts::PI / min_spacing;
    let omega_min = std::f64::consts::TAU / span.max(1e-12) * 0.5;
    let steps = 2000;
    let mut best = (0.0, omega_min);
    for k in 0..=steps {
        let omega = omega_min + (omega_max - omega_min) * k as f64 / steps as f64;
        let (mut c, mut s) = (0.0, 0.0);
        for (&x, &y) in xs.iter().zip(ys) {
            c += (y - mean) * (omega * x).cos();
            s += (y - mean) * (omega * x).sin();
        }
        let power = c * c + s * s;
        if power > best.0 {
            best = (power, omega);
        }
    }
    best.1
}
