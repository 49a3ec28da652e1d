//! Calibrated drive segments and the state-preparation sequences.
//!
//! Mode convention: storage cavity is mode 0, transmon is mode 1 of the
//! space signature.

use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::C64;
use crate::lindblad_engine::{DriveEnvelope, DriveTerm, PulseSegment, Schedule, Segment};
use crate::operator_core::{OperatorMatrix, SpaceSignature};
use crate::system_model::{hz_to_rad_per_us, SystemParams};

pub const STORAGE_MODE: usize = 0;
pub const QUBIT_MODE: usize = 1;

/// Default width of fast displacement pulses (40 ns).
pub const DISPLACEMENT_SIGMA_US: f64 = 0.04;
/// Default width of number-selective qubit pulses (1.5 us).
pub const SELECTIVE_SIGMA_US: f64 = 1.5;

#[derive(Debug, Error, PartialEq)]
pub enum PulseError {
    #[error("displacement |beta|^2 = {nbar:.3} exceeds truncation budget dim/3 = {budget:.3}")]
    TruncationBudget { nbar: f64, budget: f64 },
    #[error("selectivity violated: 2*pi*chi*sigma_t = {product:.3} (need > {min:.1}); the pulse bandwidth would overlap neighboring photon-number peaks")]
    SelectivityWarning { product: f64, min: f64 },
    #[error("invalid envelope: {0}")]
    InvalidEnvelope(String),
}

/// Gaussian drive envelope parameters in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEnvelope {
    /// Peak amplitude (rad/us).
    pub peak: f64,
    pub sigma_t_us: f64,
    /// Truncation window in units of sigma (>= 2).
    pub n_sigma: f64,
    pub carrier_phase: f64,
    pub detuning_hz: f64,
}

impl GaussianEnvelope {
    pub fn new(
        peak: f64,
        sigma_t_us: f64,
        n_sigma: f64,
        carrier_phase: f64,
        detuning_hz: f64,
    ) -> Result<Self, PulseError> {
        if sigma_t_us <= 0.0 {
            return Err(PulseError::InvalidEnvelope(format!("sigma_t = {sigma_t_us} <= 0")));
        }
        if n_sigma < 2.0 {
            return Err(PulseError::InvalidEnvelope(format!("n_sigma = {n_sigma} < 2")));
        }
        Ok(Self { peak, sigma_t_us, n_sigma, carrier_phase, detuning_hz })
    }

    pub fn duration_us(&self) -> f64 {
        2.0 * self.n_sigma * self.sigma_t_us
    }

    /// Integral of the unit-peak, baseline-subtracted shape over the
    /// truncation window (us). Simpson quadrature; the integrand is smooth.
    pub fn shape_area(&self) -> f64 {
        let duration = self.duration_us();
        let n = 2000usize;
        let h = duration / n as f64;
        let shape = DriveEnvelope::Gaussian {
            peak: 1.0,
            sigma_t_us: self.sigma_t_us,
            n_sigma: self.n_sigma,
        };
        let mut s = shape.magnitude(0.0, duration) + shape.magnitude(duration, duration);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * shape.magnitude(k as f64 * h, duration);
        }
        s * h / 3.0
    }

    pub fn into_drive(self, mode: usize) -> DriveTerm {
        DriveTerm {
            mode,
            envelope: DriveEnvelope::Gaussian {
                peak: self.peak,
                sigma_t_us: self.sigma_t_us,
                n_sigma: self.n_sigma,
            },
            phase: self.carrier_phase,
            detuning_rad_per_us: hz_to_rad_per_us(self.detuning_hz),
        }
    }
}

fn segment_from(env: GaussianEnvelope, mode: usize) -> PulseSegment {
    let duration = env.duration_us();
    let max_step = env.sigma_t_us / 50.0;
    PulseSegment { duration_us: duration, drives: vec![env.into_drive(mode)], max_step_us: max_step }
}

/// Resonant Gaussian drive on the storage mode whose integrated envelope
/// displaces a lossless cavity by exactly `beta`.
pub fn displacement_pulse(beta: C64, storage_dim: usize) -> Result<PulseSegment, PulseError> {
    displacement_pulse_with_sigma(beta, storage_dim, DISPLACEMENT_SIGMA_US)
}

pub fn displacement_pulse_with_sigma(
    beta: C64,
    storage_dim: usize,
    sigma_t_us: f64,
) -> Result<PulseSegment, PulseError> {
    let nbar = beta.norm_sqr();
    let budget = storage_dim as f64 / 3.0;
    if nbar > budget {
        return Err(PulseError::TruncationBudget { nbar, budget });
    }
    // beta = -i * integral(eps dt); carrier phase arg(beta) + pi/2 makes the
    // -i factor land on beta exactly
    let phase = beta.arg() + std::f64::consts::FRAC_PI_2;
    let mut env = GaussianEnvelope::new(1.0, sigma_t_us, 2.0, phase, 0.0)?;
    env.peak = beta.norm() / env.shape_area();
    Ok(segment_from(env, STORAGE_MODE))
}

/// Rotation angle of a selective qubit pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rotation {
    Pi,
    TwoPi,
}

impl Rotation {
    pub fn angle(self) -> f64 {
        match self {
            Rotation::Pi => std::f64::consts::PI,
            Rotation::TwoPi => std::f64::consts::TAU,
        }
    }
}

/// Solve the peak amplitude so the resonant two-level rotation angle
/// theta = 2 * integral(|eps|) equals the target. Bisection on the
/// quadrature of the envelope; the relation is monotone in the peak.
fn solve_selective_amplitude(angle: f64, env: &GaussianEnvelope) -> f64 {
    let area_per_unit_peak = env.shape_area();
    let target = angle / 2.0;
    let (mut lo, mut hi) = (0.0f64, 4.0 * target / area_per_unit_peak);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid * area_per_unit_peak < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Photon-number-selective qubit rotation: a narrow-band Gaussian drive at
/// detuning -target_n * chi_sq, performing the stated rotation on the
/// photon-number peak `target_n` and (to within its bandwidth) nothing on
/// the others.
pub fn selective_qubit_pulse(
    params: &SystemParams,
    rotation: Rotation,
    target_n: usize,
    sigma_t_us: f64,
) -> Result<PulseSegment, PulseError> {
    let chi_sigma = hz_to_rad_per_us(params.chi_sq_hz) * sigma_t_us;
    let min = 3.0;
    // chi = 0 is the decoupled limit: the pulse addresses every peak
    // identically, which is still well-defined (if no longer selective)
    if params.chi_sq_hz != 0.0 && chi_sigma <= min {
        return Err(PulseError::SelectivityWarning { product: chi_sigma, min });
    }
    let detuning_hz = -(target_n as f64) * params.chi_sq_hz;
    let mut env = GaussianEnvelope::new(1.0, sigma_t_us, 2.0, 0.0, detuning_hz)?;
    env.peak = solve_selective_amplitude(rotation.angle(), &env);
    Ok(segment_from(env, QUBIT_MODE))
}

/// Ground-state amplitude of each photon-number peak after the pulse.
///
/// For the cavity in |m> the qubit is an isolated two-level system with
/// transition offset -2*pi*chi*m in the rotating frame; the segment's drives
/// act on it directly. Integrated with the exact piecewise-constant 2x2
/// propagator, so the result matches what the full engine does to the
/// qubit-ground manifold.
fn peak_ground_amplitudes(params: &SystemParams, seg: &PulseSegment, n_peaks: usize) -> Vec<C64> {
    let chi = hz_to_rad_per_us(params.chi_sq_hz);
    let duration = seg.duration_us;
    let n_steps = ((duration / seg.max_step_us).ceil() as usize * 4).max(4000);
    let dt = duration / n_steps as f64;
    (0..n_peaks)
        .map(|m| {
            let detune = -chi * m as f64;
            let (mut g, mut e) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
            for k in 0..n_steps {
                let t = (k as f64 + 0.5) * dt;
                let eps: C64 = seg.drives.iter().map(|d| d.value(t, duration)).sum();
                // H = [[0, eps*], [eps, detune]] = c0*I + M, exact step
                let c0 = detune / 2.0;
                let vz = -detune / 2.0;
                let w = (vz * vz + eps.norm_sqr()).sqrt();
                let (cw, sw) = if w * dt > 1e-14 {
                    ((w * dt).cos(), (w * dt).sin() / w)
                } else {
                    (1.0, dt)
                };
                let phase = C64::from_polar(1.0, -c0 * dt);
                let i = C64::new(0.0, 1.0);
                let g2 = phase * (cw * g - i * sw * (vz * g + eps.conj() * e));
                let e2 = phase * (cw * e - i * sw * (eps * g - vz * e));
                g = g2;
                e = e2;
            }
            g
        })
        .collect()
}

/// Number-selective 2pi gate: the time-domain pulse followed by a digital
/// frame correction that removes the pulse's deterministic off-resonant
/// (AC-Stark) phases from the spectator peaks, leaving exactly the phase pi
/// on the target peak. The correction is diagonal in photon number and is
/// recalibrated from the pulse itself for the given parameters.
pub fn selective_two_pi_gate(
    params: &SystemParams,
    target_n: usize,
    sigma_t_us: f64,
    storage_dim: usize,
) -> Result<Vec<Segment>, PulseError> {
    let seg = selective_qubit_pulse(params, Rotation::TwoPi, target_n, sigma_t_us)?;
    let amps = peak_ground_amplitudes(params, &seg, storage_dim);
    let sig = SpaceSignature::new(&[storage_dim, 2]).expect("valid two-mode signature");
    let mut u = Array2::zeros((2 * storage_dim, 2 * storage_dim));
    let decoupled = params.chi_sq_hz == 0.0;
    for n in 0..storage_dim {
        // with chi = 0 the pulse phase is global and there is nothing to
        // correct toward: the gate degenerates to the identity (up to a
        // global phase) and the frame update must not fake selectivity
        let target = if decoupled {
            amps[n].arg()
        } else if n == target_n {
            std::f64::consts::PI
        } else {
            0.0
        };
        let corr = C64::from_polar(1.0, target - amps[n].arg());
        for q in 0..2 {
            let idx = sig.ravel(&[n, q]);
            u[[idx, idx]] = corr;
        }
    }
    Ok(vec![
        Segment::Pulse(seg),
        Segment::Unitary(OperatorMatrix::new(sig, u).expect("diagonal unitary")),
    ])
}

/// Number-selective 2pi gate without the frame correction. This is what the
/// hardware applies when the controller does not track per-photon-number
/// phase updates: the spectator peaks keep the pulse's AC-Stark phases, which
/// degrade the interference in displacement-gate-displacement sequences.
pub fn selective_two_pi_gate_uncorrected(
    params: &SystemParams,
    target_n: usize,
    sigma_t_us: f64,
) -> Result<Segment, PulseError> {
    let seg = selective_qubit_pulse(params, Rotation::TwoPi, target_n, sigma_t_us)?;
    Ok(Segment::Pulse(seg))
}

/// How displacement-gate-displacement sequences handle the selective pulse's
/// deterministic AC-Stark phases on spectator photon-number peaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarkFrame {
    /// Remove the phases with a digital frame update after the pulse.
    Corrected,
    /// Leave the phases in place, as on hardware without per-number frame
    /// tracking; the prepared state is visibly degraded.
    Uncorrected,
}

fn sndd_sequence(
    params: &SystemParams,
    beta1: f64,
    beta2: f64,
    frame: StarkFrame,
    storage_dim: usize,
) -> Result<Schedule, PulseError> {
    assert!(storage_dim >= 6, "Fock protocols need storage dim >= 6");
    let mut segments =
        vec![Segment::Pulse(displacement_pulse(C64::new(beta1, 0.0), storage_dim)?)];
    match frame {
        StarkFrame::Corrected => {
            segments.extend(selective_two_pi_gate(params, 0, SELECTIVE_SIGMA_US, storage_dim)?)
        }
        StarkFrame::Uncorrected => {
            segments.push(selective_two_pi_gate_uncorrected(params, 0, SELECTIVE_SIGMA_US)?)
        }
    }
    segments.push(Segment::Pulse(displacement_pulse(C64::new(beta2, 0.0), storage_dim)?));
    Ok(Schedule::new(segments))
}

/// Fock |1> preparation: D(1.14), selective 2pi on n = 0, D(-0.58).
pub fn fock_one_sequence(
    params: &SystemParams,
    storage_dim: usize,
) -> Result<Schedule, PulseError> {
    sndd_sequence(params, 1.14, -0.58, StarkFrame::Corrected, storage_dim)
}

/// Fock |1> preparation as run without frame correction.
pub fn fock_one_sequence_uncorrected(
    params: &SystemParams,
    storage_dim: usize,
) -> Result<Schedule, PulseError> {
    sndd_sequence(params, 1.14, -0.58, StarkFrame::Uncorrected, storage_dim)
}

/// (|0> + |1>)/sqrt(2) preparation: D(0.56), selective 2pi on n = 0,
/// D(-0.24).
pub fn superposition_sequence(
    params: &SystemParams,
    storage_dim: usize,
) -> Result<Schedule, PulseError> {
    sndd_sequence(params, 0.56, -0.24, StarkFrame::Corrected, storage_dim)
}

/// (|0> + |1>)/sqrt(2) preparation as run without frame correction.
pub fn superposition_sequence_uncorrected(
    params: &SystemParams,
    storage_dim: usize,
) -> Result<Schedule, PulseError> {
    sndd_sequence(params, 0.56, -0.24, StarkFrame::Uncorrected, storage_dim)
}

/// Analysis displacement of fixed magnitude 0.8 and a programmable digital
/// phase, used to map phase coherence onto the vacuum population.
pub fn analysis_displacement(phase: f64, storage_dim: usize) -> Result<PulseSegment, PulseError> {
    displacement_pulse(Complex64::from_polar(0.8, phase), storage_dim)
}
