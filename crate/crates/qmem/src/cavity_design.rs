//! Microwave design calculators and resonator-response fitting.
//!
//! Covers the coaxial-stub geometry: the below-cutoff circular waveguide
//! section that seals the resonator, the quarter-wave frequency estimate,
//! participation-ratio quality bounds, and the shunt-resonator S21 model
//! with a circle fit for extracting internal quality factors.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::fit::{self, FitError};

/// Exact SI speed of light.
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;
/// First root of the Bessel function J0; sets the TM01 cutoff.
pub const TM01_BESSEL_ROOT: f64 = 2.405;

const C_MM_PER_S: f64 = SPEED_OF_LIGHT_M_PER_S * 1e3;

#[derive(Debug, Error, PartialEq)]
pub enum DesignError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("mode propagates above cutoff (beta has real part {0:.4} 1/mm); no evanescent decay")]
    NotEvanescent(f64),
    #[error("degenerate trace: {0}")]
    DegenerateTrace(String),
    #[error("malformed trace record at line {line}: {reason}")]
    MalformedTrace { line: usize, reason: String },
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Coaxial-stub mechanical dimensions, all in millimetres.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WaveguideGeometry {
    /// Radius of the circular waveguide section.
    pub radius_mm: f64,
    /// Distance from the stub tip to the seal.
    pub seal_distance_mm: f64,
    /// Transmission-line (stub) length.
    pub line_length_mm: f64,
}

impl WaveguideGeometry {
    pub fn new(radius_mm: f64, seal_distance_mm: f64, line_length_mm: f64) -> Result<Self, DesignError> {
        if radius_mm <= 0.0 || seal_distance_mm <= 0.0 || line_length_mm <= 0.0 {
            return Err(DesignError::InvalidGeometry(
                "all dimensions must be positive".into(),
            ));
        }
        Ok(Self { radius_mm, seal_distance_mm, line_length_mm })
    }
}

/// Surface-loss participation ratios and the quality factors they budget.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SurfaceBudget {
    pub p_diel: f64,
    pub p_mag: f64,
    pub q_int: f64,
    pub q_ext: f64,
}

impl SurfaceBudget {
    pub fn new(p_diel: f64, p_mag: f64, q_int: f64, q_ext: f64) -> Result<Self, DesignError> {
        for (name, p) in [("p_diel", p_diel), ("p_mag", p_mag)] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(DesignError::InvalidGeometry(format!(
                    "{name} = {p} outside (0, 1]"
                )));
            }
        }
        if q_int <= 0.0 || q_ext <= 0.0 {
            return Err(DesignError::InvalidGeometry("quality factors must be positive".into()));
        }
        Ok(Self { p_diel, p_mag, q_int, q_ext })
    }
}

/// TM01 cutoff frequency of a circular waveguide of radius `a_mm`.
pub fn cutoff_frequency_hz(a_mm: f64) -> f64 {
    TM01_BESSEL_ROOT * C_MM_PER_S / (2.0 * std::f64::consts::PI * a_mm)
}

/// TM01 propagation constant in 1/mm: beta = sqrt(k^2 - (x01/a)^2),
/// purely imaginary below cutoff (evanescent), real above.
pub fn propagation_constant(f_hz: f64, a_mm: f64) -> Complex64 {
    let k = 2.0 * std::f64::consts::PI * f_hz / C_MM_PER_S;
    let kc = TM01_BESSEL_ROOT / a_mm;
    let disc = k * k - kc * kc;
    if disc >= 0.0 {
        Complex64::new(disc.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-disc).sqrt())
    }
}

/// Evanescent energy-density suppression e^{-2|beta| z} after `z_mm` of
/// below-cutoff waveguide. Errors if the mode actually propagates.
pub fn energy_suppression(z_mm: f64, beta_per_mm: Complex64) -> Result<f64, DesignError> {
    if beta_per_mm.re.abs() > 1e-12 {
        return Err(DesignError::NotEvanescent(beta_per_mm.re));
    }
    Ok((-2.0 * beta_per_mm.im.abs() * z_mm).exp())
}

/// Quarter-wave estimate f = c / (4 l). The physical device resonates below
/// this because qubit and coupler loading add effective electrical length.
pub fn quarter_wave_frequency_hz(length_mm: f64) -> f64 {
    C_MM_PER_S / (4.0 * length_mm)
}

/// Material quality bound inferred from a measured Q_int and a surface
/// participation ratio p: Q_material >= Q_int * p.
pub fn participation_bound(q_int: f64, p: f64) -> f64 {
    q_int * p
}

/// Shunt-resonator transmission:
/// S21(f) = 1 - (Q_tot/Q_ext) e^{i phi} / (1 + 2i Q_tot (f - f0)/f0).
pub fn s21_shunt_model(
    f_hz: f64,
    f0_hz: f64,
    q_int: f64,
    q_ext: f64,
    phi: f64,
) -> Complex64 {
    let q_tot = 1.0 / (1.0 / q_int + 1.0 / q_ext);
    let depth = Complex64::from_polar(q_tot / q_ext, phi);
    let denom = Complex64::new(1.0, 2.0 * q_tot * (f_hz - f0_hz) / f0_hz);
    Complex64::new(1.0, 0.0) - depth / denom
}

/// Extracted resonator parameters from a circle fit.
#[derive(Debug, Clone, Serialize)]
pub struct S21Fit {
    pub f0_hz: f64,
    pub q_int: f64,
    pub q_ext: f64,
    pub q_tot: f64,
    pub phi: f64,
    pub residual_norm: f64,
}

/// Kasa algebraic circle fit: least squares on x^2 + y^2 + D x + E y + F = 0.
/// Returns (center, radius).
fn kasa_circle(points: &[Complex64]) -> Result<(Complex64, f64), DesignError> {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut sxz, mut syz, mut sz) = (0.0, 0.0, 0.0);
    for p in points {
        let (x, y) = (p.re, p.im);
        let z = x * x + y * y;
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
        sxz += x * z;
        syz += y * z;
        sz += z;
    }
    // normal equations for (D, E, F)
    let a = vec![
        vec![sxx, sxy, sx],
        vec![sxy, syy, sy],
        vec![sx, sy, n],
    ];
    let b = vec![-sxz, -syz, -sz];
    let sol = solve3(a, b).ok_or_else(|| {
        DesignError::DegenerateTrace("collinear points; circle fit is singular".into())
    })?;
    let center = Complex64::new(-sol[0] / 2.0, -sol[1] / 2.0);
    let r2 = center.norm_sqr() - sol[2];
    if r2 <= 0.0 {
        return Err(DesignError::DegenerateTrace("non-positive circle radius".into()));
    }
    Ok((center, r2.sqrt()))
}

fn solve3(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; 3];
    for col in (0..3).rev() {
        let mut s = b[col];
        for k in col + 1..3 {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}

/// Fit the shunt model to a measured trace. Seeds come from a Kasa circle
/// fit (depth and impedance angle from the circle geometry, f0 from the
/// point farthest off the baseline, Q_tot from the phase winding), then a
/// damped least-squares refinement on the full complex model.
pub fn s21_circle_fit(freqs_hz: &[f64], trace: &[Complex64]) -> Result<S21Fit, DesignError> {
    if freqs_hz.len() != trace.len() {
        return Err(DesignError::DegenerateTrace("frequency/trace length mismatch".into()));
    }
    if freqs_hz.len() < 50 {
        return Err(DesignError::Fit(FitError::InsufficientData {
            points: freqs_hz.len(),
            params: 4,
        }));
    }
    let (center, radius) = kasa_circle(trace)?;
    // sanity: the points should actually lie near the fitted circle
    let scatter = trace
        .iter()
        .map(|p| ((p - center).norm() - radius).abs())
        .fold(0.0f64, f64::max);
    if scatter > 0.5 * radius {
        return Err(DesignError::DegenerateTrace(format!(
            "points deviate from fitted circle by {:.1}% of radius",
            100.0 * scatter / radius
        )));
    }
    // model circle: center 1 - (d/2) e^{i phi}, radius d/2, d = Q_tot/Q_ext
    let depth = 2.0 * radius;
    let offres = Complex64::new(1.0, 0.0);
    let phi = (offres - center).arg();
    // resonance = point on the trace farthest from the off-resonant point
    let i0 = (0..trace.len())
        .max_by(|&i, &j| {
            (trace[i] - offres).norm().total_cmp(&(trace[j] - offres).norm())
        })
        .unwrap();
    let f0 = freqs_hz[i0];
    // Q_tot seed from the angle swept around the circle center: the point at
    // detuning delta sits at angle 2*atan(2 Q_tot delta/f0) from resonance
    let theta0 = (trace[i0] - center).arg();
    let mut q_seed = 0.0;
    let mut n_seed = 0.0;
    for (&f, p) in freqs_hz.iter().zip(trace) {
        let delta = (f - f0) / f0;
        if delta.abs() < 1e-15 {
            continue;
        }
        let mut dtheta = (p - center).arg() - theta0;
        while dtheta > std::f64::consts::PI {
            dtheta -= std::f64::consts::TAU;
        }
        while dtheta < -std::f64::consts::PI {
            dtheta += std::f64::consts::TAU;
        }
        // dtheta = -2 atan(2 Q delta) for the ideal trace
        let q = (-dtheta / 2.0).tan() / (2.0 * delta);
        if q.is_finite() && q > 0.0 {
            q_seed += q;
            n_seed += 1.0;
        }
    }
    if n_seed < 1.0 {
        return Err(DesignError::DegenerateTrace("no usable phase winding".into()));
    }
    q_seed /= n_seed;

    // refine on the full complex model; stack Re and Im as a real system
    let n = trace.len();
    let f_ref = f0;
    let lw_seed = f0 / q_seed.max(1.0);
    let freqs = freqs_hz.to_vec();
    // parameters, scaled to order unity: [(f0-f_ref)/linewidth, ln Q_tot, d, phi]
    let model = move |p: &[f64], x: f64| -> f64 {
        let idx = x as usize;
        let (i, re_part) = if idx < n { (idx, true) } else { (idx - n, false) };
        // keep the detuning as a difference of small numbers: f_ref is
        // ~1e9 Hz and the shift ~1e0 Hz, far below one ULP of their sum
        let detuning = (freqs[i] - f_ref) - p[0] * lw_seed;
        let q_tot = p[1].exp();
        let pre = Complex64::from_polar(p[2], p[3]);
        let denom = Complex64::new(1.0, 2.0 * q_tot * detuning / f_ref);
        let s = Complex64::new(1.0, 0.0) - pre / denom;
        if re_part {
            s.re
        } else {
            s.im
        }
    };
    let xs: Vec<f64> = (0..2 * n).map(|i| i as f64).collect();
    let ys: Vec<f64> = trace
        .iter()
        .map(|p| p.re)
        .chain(trace.iter().map(|p| p.im))
        .collect();
    let p0 = [0.0, q_seed.max(1.0).ln(), depth, phi];
    let out = fit::levenberg_marquardt(&model, &xs, &ys, &p0)?;
    let f0_fit = f_ref + out.params[0] * lw_seed;
    let q_tot = out.params[1].exp();
    let d = out.params[2].abs();
    if d <= 0.0 || d >= 1.0 + 1e-9 {
        return Err(DesignError::DegenerateTrace(format!("unphysical dip depth {d}")));
    }
    let q_ext = q_tot / d;
    let inv_int = 1.0 / q_tot - 1.0 / q_ext;
    if inv_int <= 0.0 {
        return Err(DesignError::DegenerateTrace("negative internal loss".into()));
    }
    Ok(S21Fit {
        f0_hz: f0_fit,
        q_int: 1.0 / inv_int,
        q_ext,
        q_tot,
        phi: out.params[3],
        residual_norm: out.residual_norm,
    })
}

/// Parse a VNA-style CSV trace with columns freq_hz, re_s21, im_s21.
/// A header row is accepted and skipped.
pub fn parse_s21_trace(text: &str) -> Result<(Vec<f64>, Vec<Complex64>), DesignError> {
    let mut freqs = Vec::new();
    let mut trace = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(DesignError::MalformedTrace {
                line: lineno + 1,
                reason: format!("expected 3 columns, found {}", cols.len()),
            });
        }
        if lineno == 0 && cols[0].parse::<f64>().is_err() {
            continue; // header
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| DesignError::MalformedTrace {
                line: lineno + 1,
                reason: format!("not a number: {s:?}"),
            })
        };
        freqs.push(parse(cols[0])?);
        trace.push(Complex64::new(parse(cols[1])?, parse(cols[2])?));
    }
    Ok((freqs, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn synth_trace(
        f0: f64,
        q_int: f64,
        q_ext: f64,
        phi: f64,
        n: usize,
        linewidths: f64,
    ) -> (Vec<f64>, Vec<Complex64>) {
        let q_tot = 1.0 / (1.0 / q_int + 1.0 / q_ext);
        let lw = f0 / q_tot;
        let freqs: Vec<f64> = (0..n)
            .map(|i| f0 + lw * linewidths * (i as f64 / (n - 1) as f64 - 0.5))
            .collect();
        let trace = freqs
            .iter()
            .map(|&f| s21_shunt_model(f, f0, q_int, q_ext, phi))
            .collect();
        (freqs, trace)
    }

    #[test]
    fn beta_zero_at_cutoff_and_free_limit() {
        let a = 5.0;
        let fc = cutoff_frequency_hz(a);
        assert!(propagation_constant(fc, a).norm() < 1e-12);
        // huge radius: beta -> k
        let f = 4.25e9;
        let k = 2.0 * std::f64::consts::PI * f / C_MM_PER_S;
        assert_relative_eq!(propagation_constant(f, 1e9).re, k, max_relative = 1e-6);
    }

    #[test]
    fn below_cutoff_decay_length() {
        let beta = propagation_constant(4.25e9, 5.0);
        assert_eq!(beta.re, 0.0);
        assert_relative_eq!(1.0 / beta.im, 2.12, max_relative = 0.005);
    }

    #[test]
    fn beta_continuous_through_cutoff() {
        let a = 5.0;
        let fc = cutoff_frequency_hz(a);
        for eps in [1e-3, 1e-5, 1e-7] {
            let below = propagation_constant(fc * (1.0 - eps), a).norm();
            let above = propagation_constant(fc * (1.0 + eps), a).norm();
            assert!(below < 0.481 * (3.0 * eps).sqrt());
            assert!(above < 0.481 * (3.0 * eps).sqrt());
        }
    }

    #[test]
    fn seal_suppression_is_sub_part_per_billion() {
        let beta = propagation_constant(4.25e9, 5.0);
        let s = energy_suppression(23.0, beta).unwrap();
        assert!(s < 1e-9, "suppression {s:.3e}");
        assert!(s > 1e-10, "suppression {s:.3e}");
        // quoted one-significant-figure value
        assert_relative_eq!(s, 4.0e-10, max_relative = 0.15);
    }

    #[test]
    fn ten_decay_lengths_give_e_minus_twenty() {
        let beta = propagation_constant(4.25e9, 5.0);
        let z = 10.0 / beta.im;
        assert_relative_eq!(
            energy_suppression(z, beta).unwrap(),
            (-20.0f64).exp(),
            max_relative = 1e-12
        );
        assert_relative_eq!(energy_suppression(0.0, beta).unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn above_cutoff_rejected() {
        let beta = propagation_constant(30e9, 5.0);
        assert!(matches!(
            energy_suppression(23.0, beta),
            Err(DesignError::NotEvanescent(_))
        ));
    }

    #[test]
    fn quarter_wave_estimates() {
        assert_relative_eq!(quarter_wave_frequency_hz(17.6), 4.25e9, max_relative = 0.005);
        assert_relative_eq!(quarter_wave_frequency_hz(20.0), 3.75e9, max_relative = 0.001);
        assert_relative_eq!(
            quarter_wave_frequency_hz(40.0),
            quarter_wave_frequency_hz(20.0) / 2.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn participation_bounds_match_budget() {
        assert_relative_eq!(participation_bound(7e7, 2e-7), 14.0, max_relative = 1e-12);
        assert_relative_eq!(participation_bound(7e7, 4e-5), 2800.0, max_relative = 1e-12);
        assert_relative_eq!(participation_bound(7e7, 1.0), 7e7, max_relative = 1e-15);
    }

    #[test]
    fn shunt_model_limits() {
        // decoupled resonator is invisible
        let s = s21_shunt_model(4.25e9, 4.25e9, 7e7, 1e18, 0.0);
        assert!((s - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        // on-resonance dip depth is Q_tot/Q_ext
        let (q_int, q_ext) = (7e7, 1e9);
        let q_tot = 1.0 / (1.0 / q_int + 1.0 / q_ext);
        let dip = s21_shunt_model(4.25e9, 4.25e9, q_int, q_ext, 0.0);
        assert_relative_eq!(1.0 - dip.re, q_tot / q_ext, max_relative = 1e-12);
    }

    #[test]
    fn circle_fit_recovers_paper_quality_factor() {
        use rand::{Rng, SeedableRng};
        let (f0, q_int, q_ext, phi) = (4.25e9, 7e7, 1e9, 0.3);
        let (freqs, clean) = synth_trace(f0, q_int, q_ext, phi, 201, 10.0);
        // 40 dB SNR: noise amplitude 1% of the dip depth
        let q_tot = 1.0 / (1.0 / q_int + 1.0 / q_ext);
        let sigma = 0.01 * q_tot / q_ext;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let noisy: Vec<Complex64> = clean
            .iter()
            .map(|s| {
                s + Complex64::new(
                    sigma * rng.gen_range(-1.0..1.0),
                    sigma * rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let fit = s21_circle_fit(&freqs, &noisy).unwrap();
        assert_relative_eq!(fit.q_int, q_int, max_relative = 0.01);
        assert_relative_eq!(fit.f0_hz, f0, max_relative = 1e-9);
    }

    #[test]
    fn circle_fit_round_trip_grid() {
        for i in 0..10 {
            for j in 0..10 {
                let q_int = 1e5 * 10f64.powf(4.0 * i as f64 / 9.0);
                let q_ext = 1e5 * 10f64.powf(4.0 * j as f64 / 9.0);
                let (freqs, trace) = synth_trace(4.25e9, q_int, q_ext, -0.2, 101, 8.0);
                let fit = s21_circle_fit(&freqs, &trace)
                    .unwrap_or_else(|e| panic!("fit failed at Qi={q_int:.2e} Qe={q_ext:.2e}: {e}"));
                assert_relative_eq!(fit.q_int, q_int, max_relative = 1e-3);
                assert_relative_eq!(fit.q_ext, q_ext, max_relative = 1e-3);
            }
        }
    }

    #[test]
    fn degenerate_trace_rejected() {
        // straight line in the complex plane: not a resonance circle
        let freqs: Vec<f64> = (0..100).map(|i| 4.25e9 + i as f64 * 1e3).collect();
        let trace: Vec<Complex64> = (0..100)
            .map(|i| Complex64::new(0.5 + 1e-3 * i as f64, 0.0))
            .collect();
        assert!(s21_circle_fit(&freqs, &trace).is_err());
    }

    #[test]
    fn csv_trace_round_trip() {
        let (freqs, trace) = synth_trace(4.25e9, 7e7, 1e9, 0.1, 60, 6.0);
        let mut text = String::from("freq_hz,re_s21,im_s21\n");
        for (f, s) in freqs.iter().zip(&trace) {
            text.push_str(&format!("{f:.6},{:.12e},{:.12e}\n", s.re, s.im));
        }
        let (f2, t2) = parse_s21_trace(&text).unwrap();
        assert_eq!(f2.len(), 60);
        let fit = s21_circle_fit(&f2, &t2).unwrap();
        assert_relative_eq!(fit.q_int, 7e7, max_relative = 1e-3);
        assert!(parse_s21_trace("a,b\n").is_err());
    }
}
