//! Measurement protocols: the decay, Ramsey, spectroscopy, and sweep
//! experiments the simulator reproduces, plus readout sampling and the
//! fit wrappers the protocols and CLI share.
//!
//! Every protocol is deterministic given (config, params, seed): sampled
//! readout draws from a per-point ChaCha stream split off the master seed.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analytic_models;
use crate::control_pulses::{
    self, PulseError, Rotation, SELECTIVE_SIGMA_US,
};
use crate::fit::{self, FitError, FitParam, FitResult};
use crate::lindblad_engine::{EngineError, Schedule, Segment, Simulator};
use crate::linalg::{self, C64};
use crate::operator_core::{
    coherent_state, DensityMatrix, OperatorError, SpaceSignature,
};
use crate::system_model::{ModelError, SystemParams, TWO_PI};

/// Boltzmann constant in microelectronvolts per kelvin.
const K_B_UEV_PER_K: f64 = 86.17333262;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("fringe aliasing: delay spacing {spacing_us:.3} us exceeds pi/omega = {limit_us:.3} us")]
    Aliasing { spacing_us: f64, limit_us: f64 },
    #[error("peaks unresolved: probe bandwidth is comparable to chi ({0})")]
    Resolution(PulseError),
    #[error("need at least 3 temperatures, got {0}")]
    TooFewTemperatures(usize),
    #[error(transparent)]
    Pulse(PulseError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{protocol} fit failed: {source}")]
    Fit { protocol: &'static str, source: FitError },
}

impl From<PulseError> for ExperimentError {
    fn from(e: PulseError) -> Self {
        match e {
            PulseError::SelectivityWarning { .. } => ExperimentError::Resolution(e),
            other => ExperimentError::Pulse(other),
        }
    }
}

/// How populations become numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ReadoutMode {
    /// Report the exact quantum-mechanical probability.
    ExactProbability,
    /// Threshold sampled IQ records, binomial noise and all.
    SampledIq,
}

/// Shared protocol configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub protocol: String,
    /// Sweep axis; meaning is protocol-specific (delays in us, temperatures
    /// in K, thermal populations, fringe phases). None = protocol default.
    pub sweep: Option<Vec<f64>>,
    pub shots: u64,
    pub seed: u64,
    pub readout: ReadoutMode,
    /// IQ blob separation in units of the vacuum fluctuation sigma.
    pub separation_sigma: f64,
    pub bootstrap_resamples: usize,
}

impl ExperimentConfig {
    pub fn exact(protocol: &str, seed: u64) -> Self {
        Self {
            protocol: protocol.to_string(),
            sweep: None,
            shots: 10_000,
            seed,
            readout: ReadoutMode::ExactProbability,
            separation_sigma: 6.0,
            bootstrap_resamples: 300,
        }
    }

    pub fn sampled(protocol: &str, seed: u64, shots: u64) -> Self {
        Self { shots, readout: ReadoutMode::SampledIq, ..Self::exact(protocol, seed) }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if let Some(sweep) = &self.sweep {
            if sweep.is_empty() {
                return Err(ExperimentError::InvalidConfig("empty sweep axis".into()));
            }
            if sweep.windows(2).any(|w| w[1] <= w[0]) {
                return Err(ExperimentError::InvalidConfig(
                    "sweep axis must be strictly increasing".into(),
                ));
            }
        }
        if self.readout == ReadoutMode::SampledIq && self.shots == 0 {
            return Err(ExperimentError::InvalidConfig(
                "sampled readout needs shots >= 1".into(),
            ));
        }
        if self.separation_sigma <= 0.0 {
            return Err(ExperimentError::InvalidConfig("separation must be positive".into()));
        }
        Ok(())
    }
}

/// One dispersed-readout shot, in units of the vacuum fluctuation sigma.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IQRecord {
    pub i_m: f64,
    pub q_m: f64,
}

/// One sweep point as emitted to CSV.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepPoint {
    pub sweep_value: f64,
    pub observable: f64,
    pub stderr: f64,
}

/// Protocol output: the raw sweep and the fitted summary.
#[derive(Debug, Clone, Serialize)]
pub struct ProtocolRun {
    pub points: Vec<SweepPoint>,
    pub fit: FitResult,
}

/// CSV serialization: one row per sweep point.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("sweep_value,observable,stderr\n");
    for p in points {
        out.push_str(&format!("{:.12e},{:.12e},{:.12e}\n", p.sweep_value, p.observable, p.stderr));
    }
    out
}

/// Geometric grid of `n` points spanning [0.02, 4] * t_expected (us).
pub fn default_delay_grid_us(t_expected_us: f64, n: usize) -> Vec<f64> {
    let (lo, hi) = (0.02 * t_expected_us, 4.0 * t_expected_us);
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    (0..n).map(|i| lo * ratio.powi(i as i32)).collect()
}

/// Population of storage level `n`, traced over the qubit.
fn storage_population(rho: &DensityMatrix, n: usize) -> f64 {
    let sig = &rho.signature;
    (0..sig.dims()[1]).map(|q| rho.population(sig.ravel(&[n, q]))).sum()
}

/// Excited-qubit population, traced over storage.
fn qubit_population(rho: &DensityMatrix) -> f64 {
    let sig = &rho.signature;
    (0..sig.dims()[0]).map(|n| rho.population(sig.ravel(&[n, 1]))).sum()
}

/// Convert an exact probability into the reported estimate and its error
/// bar under the configured readout.
fn read_out(p: f64, config: &ExperimentConfig, point_index: u64) -> (f64, f64) {
    match config.readout {
        ReadoutMode::ExactProbability => (p, 0.0),
        ReadoutMode::SampledIq => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(point_index.wrapping_add(1));
            let (_, est) =
                sample_iq_with_rng(p.clamp(0.0, 1.0), config.shots, config.separation_sigma, &mut rng);
            let se = (est.max(1e-12) * (1.0 - est).max(1e-12) / config.shots as f64).sqrt();
            (est, se)
        }
    }
}

fn fit_param(name: &str, unit: &str, value: f64, ci: (f64, f64)) -> FitParam {
    FitParam { name: name.into(), unit: unit.into(), value, ci_low: ci.0, ci_high: ci.1 }
}

/// Ground-qubit vacuum product state of a storage+qubit register.
fn vacuum(storage_dim: usize) -> (SpaceSignature, DensityMatrix) {
    let sig = SpaceSignature::new(&[storage_dim, 2]).expect("two-mode signature");
    let rho = DensityMatrix::fock(sig.clone(), &[0, 0]).expect("vacuum exists");
    (sig, rho)
}

/// Evolve `rho` for each absolute delay using cached idle propagators,
/// handing (index, delayed state) to the observer. Points are independent
/// and run in parallel.
fn sweep_delays<F>(
    sim: &Simulator,
    rho0: &DensityMatrix,
    delays_us: &[f64],
    observe: F,
) -> Result<Vec<f64>, ExperimentError>
where
    F: Fn(usize, DensityMatrix) -> Result<f64, ExperimentError> + Sync,
{
    delays_us
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let prop = sim.idle_propagator(t);
            let rho = DensityMatrix::new_unchecked(
                rho0.signature.clone(),
                prop.apply(&rho0.entries),
            );
            observe(i, rho)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// coherent-state decay
// ---------------------------------------------------------------------------

pub const COHERENT_DECAY_BETA0: f64 = 3.0;
pub const COHERENT_DECAY_STORAGE_DIM: usize = 30;

/// Cavity lifetime from the return of a decaying coherent state to vacuum:
/// P_vac(t) = exp(-|beta0|^2 e^{-kappa t}). Fits kappa and reports it in
/// Hz (kappa/2pi).
pub fn coherent_decay(
    config: &ExperimentConfig,
    params: &SystemParams,
) -> Result<ProtocolRun, ExperimentError> {
    coherent_decay_with(config, params, COHERENT_DECAY_BETA0, COHERENT_DECAY_STORAGE_DIM)
}

pub fn coherent_decay_with(
    config: &ExperimentConfig,
    params: &SystemParams,
    beta0: f64,
    storage_dim: usize,
) -> Result<ProtocolRun, ExperimentError> {
    config.validate()?;
    let (sig, _) = vacuum(storage_dim);
    let sim = Simulator::new(params, sig.clone())?;
    // state preparation is an instantaneous displacement: the 0.16 us pulse
    // is four orders of magnitude faster than 1/kappa, so the fidelity cost
    // of the idealization is negligible and the sweep stays cheap
    let storage = coherent_state(C64::new(beta0, 0.0), storage_dim)?;
    let qubit = DensityMatrix::fock(SpaceSignature::new(&[2]).unwrap(), &[0])?;
    let rho0 = DensityMatrix::new_unchecked(
        sig.clone(),
        linalg::kron(&storage.entries, &qubit.entries),
    );

    let t_expected_us = if params.kappa > 0.0 { 1e6 / params.kappa } else { 1e3 };
    let delays = match &config.sweep {
        Some(s) => s.clone(),
        None => default_delay_grid_us(t_expected_us, 30),
    };
    let pvac = sweep_delays(&sim, &rho0, &delays, |_, rho| Ok(storage_population(&rho, 0)))?;
    let points: Vec<SweepPoint> = delays
        .iter()
        .zip(&pvac)
        .enumerate()
        .map(|(i, (&t, &p))| {
            let (obs, se) = read_out(p, config, i as u64);
            SweepPoint { sweep_value: t, observable: obs, stderr: se }
        })
        .collect();

    // fit in seconds so kappa lands near its 1/s magnitude
    let xs: Vec<f64> = points.iter().map(|p| p.sweep_value * 1e-6).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.observable).collect();
    let kappa_guess = params.kappa.max(0.5 / xs.last().unwrap());
    let p0 = [1.0, beta0 * beta0, kappa_guess, 0.0];
    let out = fit::levenberg_marquardt(fit::exp_of_exp_model, &xs, &ys, &p0)
        .map_err(|source| ExperimentError::Fit { protocol: "coherent_decay", source })?;
    let ci = fit::bootstrap_ci(fit::exp_of_exp_model, &xs, &ys, &out, config.bootstrap_resamples, config.seed)
        .map_err(|source| ExperimentError::Fit { protocol: "coherent_decay", source })?;
    let fitres = FitResult {
        model: "exp_of_exp".into(),
        params: vec![
            fit_param("amplitude", "", out.params[0], ci[0]),
            fit_param("nbar", "photons", out.params[1], ci[1]),
            fit_param("kappa", "1/s", out.params[2], ci[2]),
            fit_param(
                "kappa_over_2pi",
                "Hz",
                out.params[2] / TWO_PI,
                (ci[2].0 / TWO_PI, ci[2].1 / TWO_PI),
            ),
            fit_param("offset", "", out.params[3], ci[3]),
        ],
        residual_norm: out.residual_norm,
    };
    Ok(ProtocolRun { points, fit: fitres })
}

// ---------------------------------------------------------------------------
// Fock-state T1
// ---------------------------------------------------------------------------

pub const FOCK_STORAGE_DIM: usize = 8;

/// Single-photon lifetime: prepare |1> with the full pulse sequence, hold,
/// and fit the n = 1 population to a single exponential. The preparation is
/// imperfect under decoherence; amplitude and offset absorb that, the time
/// constant does not.
pub fn fock_t1(
    config: &ExperimentConfig,
    params: &SystemParams,
) -> Result<ProtocolRun, ExperimentError> {
    config.validate()?;
    let (sig, rho_vac) = vacuum(FOCK_STORAGE_DIM);
    let sim = Simulator::new(params, sig)?;
    let prep = control_pulses::fock_one_sequence(params, FOCK_STORAGE_DIM)?;
    let rho1 = sim.evolve(&rho_vac, &prep)?.final_state().clone();
    fock_decay_from(config, params, &sim, &rho1, "fock_t1")
}

/// T1 sweep from an already-prepared state (shared with temperature_sweep,
/// which idealizes preparation).
fn fock_decay_from(
    config: &ExperimentConfig,
    params: &SystemParams,
    sim: &Simulator,
    rho1: &DensityMatrix,
    protocol: &'static str,
) -> Result<ProtocolRun, ExperimentError> {
    let t_expected_us = 1e6 / params.kappa.max(1e-3);
    let delays = match &config.sweep {
        Some(s) => s.clone(),
        None => default_delay_grid_us(t_expected_us, 30),
    };
    let p1 = sweep_delays(sim, rho1, &delays, |_, rho| Ok(storage_population(&rho, 1)))?;
    let points: Vec<SweepPoint> = delays
        .iter()
        .zip(&p1)
        .enumerate()
        .map(|(i, (&t, &p))| {
            let (obs, se) = read_out(p, config, i as u64);
            SweepPoint { sweep_value: t, observable: obs, stderr: se }
        })
        .collect();

    // fit in milliseconds: T1 ~ 1 ms
    let xs: Vec<f64> = points.iter().map(|p| p.sweep_value * 1e-3).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.observable).collect();
    let p0 = fit::guess_exponential(&xs, &ys);
    let out = fit::levenberg_marquardt(fit::exponential_model, &xs, &ys, &p0)
        .map_err(|source| ExperimentError::Fit { protocol, source })?;
    let ci = fit::bootstrap_ci(
        fit::exponential_model,
        &xs,
        &ys,
        &out,
        config.bootstrap_resamples,
        config.seed,
    )
    .map_err(|source| ExperimentError::Fit { protocol, source })?;
    let fitres = FitResult {
        model: "exponential".into(),
        params: vec![
            fit_param("amplitude", "", out.params[0], ci[0]),
            fit_param("t1", "ms", out.params[1], ci[1]),
            fit_param("offset", "", out.params[2], ci[2]),
        ],
        residual_norm: out.residual_norm,
    };
    Ok(ProtocolRun { points, fit: fitres })
}

// ---------------------------------------------------------------------------
// Ramsey T2
// ---------------------------------------------------------------------------

pub const RAMSEY_DEFAULT_OMEGA_RAD_PER_US: f64 = TWO_PI * 2e-3; // 2 kHz fringe

/// Cavity Ramsey: prepare (|0>+|1>)/sqrt(2), hold, map phase onto the
/// vacuum population with an analysis displacement whose digital phase
/// advances as omega * t, and fit a decaying fringe.
pub fn ramsey_t2(
    config: &ExperimentConfig,
    params: &SystemParams,
) -> Result<ProtocolRun, ExperimentError> {
    ramsey_t2_with(config, params, RAMSEY_DEFAULT_OMEGA_RAD_PER_US)
}

/// Expected T2 from the analytic composition of photon loss and
/// qubit-induced dephasing (1/s converted to us here).
fn expected_t2_us(params: &SystemParams) -> f64 {
    let t1_s = 1.0 / params.kappa.max(1e-9);
    let gamma_phi = qubit_induced_dephasing(params) + params.gamma_phi_0;
    1e6 / (0.5 / t1_s + gamma_phi).max(1e-9)
}

/// Exact qubit-induced dephasing rate at the current parameters (1/s);
/// zero in the undriven/undamped limits where the formula degenerates.
fn qubit_induced_dephasing(params: &SystemParams) -> f64 {
    if params.gamma <= 0.0 || params.p_e <= 0.0 {
        return 0.0;
    }
    analytic_models::dephasing_exact(params.chi_sq_hz, params.gamma, params.p_e)
        .expect("validated parameters")
}

pub fn ramsey_t2_with(
    config: &ExperimentConfig,
    params: &SystemParams,
    omega_rad_per_us: f64,
) -> Result<ProtocolRun, ExperimentError> {
    config.validate()?;
    let limit_us = std::f64::consts::PI / omega_rad_per_us;
    let delays = match &config.sweep {
        Some(s) => {
            for w in s.windows(2) {
                if w[1] - w[0] > limit_us {
                    return Err(ExperimentError::Aliasing { spacing_us: w[1] - w[0], limit_us });
                }
            }
            s.clone()
        }
        None => {
            // geometric grid, then subdivide every interval that would
            // undersample the fringe
            let base = default_delay_grid_us(expected_t2_us(params), 30);
            let mut grid = vec![base[0]];
            for w in base.windows(2) {
                let gap = w[1] - w[0];
                let pieces = (gap / (0.9 * limit_us)).ceil().max(1.0) as usize;
                for k in 1..=pieces {
                    grid.push(w[0] + gap * k as f64 / pieces as f64);
                }
            }
            grid
        }
    };

    let (sig, rho_vac) = vacuum(FOCK_STORAGE_DIM);
    let sim = Simulator::new(params, sig)?;
    let prep = control_pulses::superposition_sequence(params, FOCK_STORAGE_DIM)?;
    let rho0 = sim.evolve(&rho_vac, &prep)?.final_state().clone();

    let pvac = sweep_delays(&sim, &rho0, &delays, |i, rho| {
        let analysis =
            control_pulses::analysis_displacement(omega_rad_per_us * delays[i], FOCK_STORAGE_DIM)?;
        let schedule = Schedule::new(vec![Segment::Pulse(analysis)]);
        let after = sim.evolve(&rho, &schedule)?;
        Ok(storage_population(after.final_state(), 0))
    })?;
    let points: Vec<SweepPoint> = delays
        .iter()
        .zip(&pvac)
        .enumerate()
        .map(|(i, (&t, &p))| {
            let (obs, se) = read_out(p, config, i as u64);
            SweepPoint { sweep_value: t, observable: obs, stderr: se }
        })
        .collect();

    // fit in milliseconds; omega passed in rad/ms
    let xs: Vec<f64> = points.iter().map(|p| p.sweep_value * 1e-3).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.observable).collect();
    let omega_guess = fit::guess_fringe_frequency(&xs, &ys);
    let amp0 = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - 0.5;
    let t2_guess_ms = expected_t2_us(params) * 1e-3;
    let p0 = [amp0.max(0.05), t2_guess_ms, omega_guess, 0.0, -0.05, t2_guess_ms];
    let out = fit::levenberg_marquardt(fit::decaying_sinusoid_model, &xs, &ys, &p0)
        .map_err(|source| ExperimentError::Fit { protocol: "ramsey_t2", source })?;
    let ci = fit::bootstrap_ci(
        fit::decaying_sinusoid_model,
        &xs,
        &ys,
        &out,
        config.bootstrap_resamples,
        config.seed,
    )
    .map_err(|source| ExperimentError::Fit { protocol: "ramsey_t2", source })?;
    let fitres = FitResult {
        model: "decaying_sinusoid".into(),
        params: vec![
            fit_param("amplitude", "", out.params[0], ci[0]),
            fit_param("t2", "ms", out.params[1].abs(), ci[1]),
            fit_param("omega", "rad/ms", out.params[2], ci[2]),
            fit_param("phi", "rad", out.params[3], ci[3]),
            fit_param("baseline_amp", "", out.params[4], ci[4]),
            fit_param("baseline_tau", "ms", out.params[5], ci[5]),
        ],
        residual_norm: out.residual_norm,
    };
    Ok(ProtocolRun { points, fit: fitres })
}

// ---------------------------------------------------------------------------
// qubit spectroscopy
// ---------------------------------------------------------------------------

/// Photon-number populations via number-selective qubit spectroscopy.
#[derive(Debug, Clone, Serialize)]
pub struct SpectroscopyResult {
    /// Probe detunings in Hz (the comb -n * chi_sq).
    pub detunings_hz: Vec<f64>,
    /// Raw excited-qubit probability after each probe.
    pub raw: Vec<f64>,
    /// Normalized peak weights: the P_n estimates.
    pub populations: Vec<f64>,
}

/// Probe the qubit with a selective pi pulse on each photon-number peak of
/// `state` and report the normalized peak weights as Fock populations.
/// Normalization removes the common-mode qubit decay during the probe.
pub fn qubit_spectroscopy(
    state: &DensityMatrix,
    params: &SystemParams,
    sim: &Simulator,
    n_peaks: usize,
) -> Result<SpectroscopyResult, ExperimentError> {
    let raw: Vec<f64> = (0..n_peaks)
        .into_par_iter()
        .map(|n| -> Result<f64, ExperimentError> {
            let probe = control_pulses::selective_qubit_pulse(
                params,
                Rotation::Pi,
                n,
                SELECTIVE_SIGMA_US,
            )?;
            let schedule = Schedule::new(vec![Segment::Pulse(probe)]);
            let after = sim.evolve(state, &schedule)?;
            Ok(qubit_population(after.final_state()))
        })
        .collect::<Result<_, _>>()?;
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(ExperimentError::InvalidConfig("no spectral weight found".into()));
    }
    Ok(SpectroscopyResult {
        detunings_hz: (0..n_peaks).map(|n| -(n as f64) * params.chi_sq_hz).collect(),
        populations: raw.iter().map(|r| r / total).collect(),
        raw,
    })
}

// ---------------------------------------------------------------------------
// temperature sweep
// ---------------------------------------------------------------------------

/// Quasiparticle-activated qubit decay: gamma(T) = gamma0 + A e^{-gap/kT},
/// with A calibrated so gamma quadruples at `quadrupling_temperature_k`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GammaVsTemperature {
    pub gamma0_per_s: f64,
    pub gap_uev: f64,
    pub quadrupling_temperature_k: f64,
}

impl GammaVsTemperature {
    pub fn paper_default(gamma0_per_s: f64) -> Self {
        Self { gamma0_per_s, gap_uev: 180.0, quadrupling_temperature_k: 0.18 }
    }

    pub fn gamma_per_s(&self, t_k: f64) -> f64 {
        let a = 3.0 * self.gamma0_per_s
            * (self.gap_uev / (K_B_UEV_PER_K * self.quadrupling_temperature_k)).exp();
        self.gamma0_per_s + a * (-self.gap_uev / (K_B_UEV_PER_K * t_k)).exp()
    }
}

/// Intrinsic cavity loss vs temperature: kappa0(T) = kappa0 * (1 +
/// fractional_slope * (T - band.0)/(band.1 - band.0)). Slope defaults to 0;
/// the measured trend is about -15% across 20-150 mK.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Kappa0VsTemperature {
    pub kappa0_per_s: f64,
    pub fractional_slope: f64,
    pub band_k: (f64, f64),
}

impl Kappa0VsTemperature {
    pub fn constant(kappa0_per_s: f64) -> Self {
        Self { kappa0_per_s, fractional_slope: 0.0, band_k: (0.02, 0.15) }
    }

    pub fn paper_trend(kappa0_per_s: f64) -> Self {
        Self { kappa0_per_s, fractional_slope: -0.15, band_k: (0.02, 0.15) }
    }

    pub fn kappa0_per_s(&self, t_k: f64) -> f64 {
        let (lo, hi) = self.band_k;
        self.kappa0_per_s * (1.0 + self.fractional_slope * (t_k - lo) / (hi - lo))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TemperatureSweepResult {
    /// (temperature K, gamma 1/s, measured kappa_tot 1/s) per point.
    pub points: Vec<(f64, f64, f64)>,
    pub fit: FitResult,
}

pub const TEMPERATURE_DEFAULT_SWEEP_K: [f64; 6] = [0.02, 0.05, 0.08, 0.11, 0.14, 0.18];

/// Measure kappa_tot(T) with single-photon decay while the qubit heats up,
/// then regress kappa_tot against gamma(T) to recover the hybridization
/// ratio and the intrinsic kappa0.
///
/// Preparation is idealized to an exact Fock |1> here: the sweep probes
/// rates, not preparation fidelity, and this keeps many-temperature sweeps
/// affordable.
pub fn temperature_sweep(
    config: &ExperimentConfig,
    base: &SystemParams,
    gamma_model: &GammaVsTemperature,
    kappa0_model: &Kappa0VsTemperature,
    hybridization_ratio: f64,
    subtract_kappa0_trend: bool,
) -> Result<TemperatureSweepResult, ExperimentError> {
    config.validate()?;
    let temps = config
        .sweep
        .clone()
        .unwrap_or_else(|| TEMPERATURE_DEFAULT_SWEEP_K.to_vec());
    if temps.len() < 3 {
        return Err(ExperimentError::TooFewTemperatures(temps.len()));
    }

    let mut points = Vec::with_capacity(temps.len());
    for &t_k in &temps {
        let gamma = gamma_model.gamma_per_s(t_k);
        let mut params = base.clone();
        params.gamma = gamma;
        // the inverse-Purcell channel: qubit loss seen by the cavity
        // through the hybridization ratio
        params.kappa = kappa0_model.kappa0_per_s(t_k) + hybridization_ratio * gamma;
        params.validate()?;
        let (sig, _) = vacuum(FOCK_STORAGE_DIM);
        let sim = Simulator::new(&params, sig.clone())?;
        let rho1 = DensityMatrix::fock(sig, &[1, 0])?;
        let run = fock_decay_from(config, &params, &sim, &rho1, "temperature_sweep")?;
        let t1_ms = run.fit.param("t1").expect("exponential fit has t1").value;
        points.push((t_k, gamma, 1e3 / t1_ms));
    }

    // linear regression kappa_tot = kappa0 + ratio * gamma, optionally with
    // a fitted linear temperature trend subtracted alongside
    let n = points.len();
    let cols: usize = if subtract_kappa0_trend { 3 } else { 2 };
    let mut ata = vec![vec![0.0; cols]; cols];
    let mut atb = vec![0.0; cols];
    for &(t_k, gamma, kappa) in &points {
        let row = [1.0, gamma, t_k - temps[0]];
        for i in 0..cols {
            atb[i] += row[i] * kappa;
            for j in 0..cols {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let sol = solve_normal(ata, atb).ok_or(ExperimentError::Fit {
        protocol: "temperature_sweep",
        source: FitError::RankDeficient(0),
    })?;
    let residual: f64 = points
        .iter()
        .map(|&(t_k, gamma, kappa)| {
            let pred = sol[0]
                + sol[1] * gamma
                + if cols == 3 { sol[2] * (t_k - temps[0]) } else { 0.0 };
            (kappa - pred) * (kappa - pred)
        })
        .sum::<f64>()
        .sqrt();
    let mut fit_params = vec![
        fit_param("kappa0", "1/s", sol[0], (sol[0], sol[0])),
        fit_param("ratio", "", sol[1], (sol[1], sol[1])),
    ];
    if cols == 3 {
        fit_params.push(fit_param("kappa0_slope", "1/s/K", sol[2], (sol[2], sol[2])));
    }
    let _ = n;
    Ok(TemperatureSweepResult {
        points,
        fit: FitResult {
            model: "linear_regression".into(),
            params: fit_params,
            residual_norm: residual,
        },
    })
}

fn solve_normal(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
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

// ---------------------------------------------------------------------------
// P_e sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct PeSweepPoint {
    pub p_e: f64,
    pub t2_ms: f64,
    /// Extracted dephasing rate 1/T2 - 1/(2 T1), in 1/s.
    pub gamma_phi_per_s: f64,
    /// The analytic prediction at the same parameters.
    pub gamma_phi_exact_per_s: f64,
}

/// Measured cavity dephasing versus qubit thermal population: run the
/// Ramsey protocol at each P_e and subtract the lifetime contribution
/// using a single T1 measurement (storage T1 does not depend on P_e).
pub fn pe_sweep(
    config: &ExperimentConfig,
    base: &SystemParams,
) -> Result<Vec<PeSweepPoint>, ExperimentError> {
    config.validate()?;
    let pes = config
        .sweep
        .clone()
        .unwrap_or_else(|| vec![0.0, 0.004, 0.008, 0.016]);
    if let Some(bad) = pes.iter().find(|&&p| !(0.0..0.5).contains(&p)) {
        return Err(ExperimentError::InvalidConfig(format!("P_e = {bad} outside [0, 0.5)")));
    }
    // the sweep axis here is P_e; inner runs pick their own delay grids
    let mut inner = config.clone();
    inner.sweep = None;
    let t1_run = fock_t1(&inner, base)?;
    let t1_ms = t1_run.fit.param("t1").expect("exponential fit has t1").value;

    pes.iter()
        .map(|&p_e| {
            let mut params = base.clone();
            params.p_e = p_e;
            params.validate()?;
            // keep a few fringe cycles inside the expected decay so the
            // envelope and the frequency stay separable in the fit
            let omega = RAMSEY_DEFAULT_OMEGA_RAD_PER_US
                .max(TWO_PI * 3.0 / expected_t2_us(&params));
            let run = ramsey_t2_with(&inner, &params, omega)?;
            let t2_ms = run.fit.param("t2").expect("sinusoid fit has t2").value;
            let gamma_phi = 1e3 / t2_ms - 0.5e3 / t1_ms;
            Ok(PeSweepPoint {
                p_e,
                t2_ms,
                gamma_phi_per_s: gamma_phi,
                gamma_phi_exact_per_s: qubit_induced_dephasing(&params) + params.gamma_phi_0,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// IQ readout sampling
// ---------------------------------------------------------------------------

/// Dispersed-readout shot sampler: two unit-variance Gaussian blobs along I
/// separated by `separation_sigma`, thresholded at the midpoint. Returns
/// the records and the thresholded P_e estimate. Deterministic per seed.
pub fn sample_iq(
    p_e: f64,
    shots: u64,
    separation_sigma: f64,
    seed: u64,
) -> (Vec<IQRecord>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_iq_with_rng(p_e, shots, separation_sigma, &mut rng)
}

fn sample_iq_with_rng(
    p_e: f64,
    shots: u64,
    separation_sigma: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<IQRecord>, f64) {
    let half = separation_sigma / 2.0;
    let mut records = Vec::with_capacity(shots as usize);
    let mut above = 0u64;
    for _ in 0..shots {
        let excited = rng.gen_bool(p_e.clamp(0.0, 1.0));
        let center = if excited { half } else { -half };
        // Box-Muller pair for the two quadratures
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..TWO_PI);
        let r = (-2.0 * u1.ln()).sqrt();
        let rec = IQRecord { i_m: center + r * u2.cos(), q_m: r * u2.sin() };
        if rec.i_m > 0.0 {
            above += 1;
        }
        records.push(rec);
    }
    (records, above as f64 / shots.max(1) as f64)
}

// ---------------------------------------------------------------------------
// fit wrappers (shared with the CLI)
// ---------------------------------------------------------------------------

/// Exponential fit with log-linear seeding; x in the caller's units.
pub fn fit_exponential(
    xs: &[f64],
    ys: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<FitResult, FitError> {
    let p0 = fit::guess_exponential(xs, ys);
    let out = fit::levenberg_marquardt(fit::exponential_model, xs, ys, &p0)?;
    let ci = fit::bootstrap_ci(fit::exponential_model, xs, ys, &out, resamples, seed)?;
    Ok(FitResult {
        model: "exponential".into(),
        params: vec![
            fit_param("amplitude", "", out.params[0], ci[0]),
            fit_param("tau", "x-unit", out.params[1], ci[1]),
            fit_param("offset", "", out.params[2], ci[2]),
        ],
        residual_norm: out.residual_norm,
    })
}

/// exp-of-exp (coherent-state return) fit.
pub fn fit_exp_of_exp(
    xs: &[f64],
    ys: &[f64],
    p0: &[f64; 4],
    resamples: usize,
    seed: u64,
) -> Result<FitResult, FitError> {
    let out = fit::levenberg_marquardt(fit::exp_of_exp_model, xs, ys, p0)?;
    let ci = fit::bootstrap_ci(fit::exp_of_exp_model, xs, ys, &out, resamples, seed)?;
    Ok(FitResult {
        model: "exp_of_exp".into(),
        params: vec![
            fit_param("amplitude", "", out.params[0], ci[0]),
            fit_param("nbar", "photons", out.params[1], ci[1]),
            fit_param("kappa", "1/x-unit", out.params[2], ci[2]),
            fit_param("offset", "", out.params[3], ci[3]),
        ],
        residual_norm: out.residual_norm,
    })
}

/// Decaying-sinusoid fit with periodogram frequency seeding.
pub fn fit_decaying_sinusoid(
    xs: &[f64],
    ys: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<FitResult, FitError> {
    let omega = fit::guess_fringe_frequency(xs, ys);
    let amp = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - 0.5;
    let span = xs.last().unwrap() - xs.first().unwrap();
    let p0 = [amp.max(0.05), span / 2.0, omega, 0.0, -0.05, span / 2.0];
    let out = fit::levenberg_marquardt(fit::decaying_sinusoid_model, xs, ys, &p0)?;
    let ci = fit::bootstrap_ci(fit::decaying_sinusoid_model, xs, ys, &out, resamples, seed)?;
    Ok(FitResult {
        model: "decaying_sinusoid".into(),
        params: vec![
            fit_param("amplitude", "", out.params[0], ci[0]),
            fit_param("t2", "x-unit", out.params[1].abs(), ci[1]),
            fit_param("omega", "rad/x-unit", out.params[2], ci[2]),
            fit_param("phi", "rad", out.params[3], ci[3]),
            fit_param("baseline_amp", "", out.params[4], ci[4]),
            fit_param("baseline_tau", "x-unit", out.params[5], ci[5]),
        ],
        residual_norm: out.residual_norm,
    })
}

// silence an unused-import lint path on non-parallel builds
#[allow(unused)]
fn _assert_send(_: &Array2<Complex64>) {}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn quiet_params() -> SystemParams {
        // paper Hamiltonian, dissipation limited to cavity photon loss
        let mut p = SystemParams::paper_defaults();
        p.gamma = 1.0; // negligible but nonzero for validation
        p.gamma_phi_q = 0.0;
        p.p_e = 0.0;
        p
    }

    #[test]
    fn coherent_decay_recovers_kappa() {
        let params = SystemParams::paper_defaults();
        let config = ExperimentConfig::exact("coherent-decay", 1);
        let run = coherent_decay(&config, &params).unwrap();
        let kappa_hz = run.fit.param("kappa_over_2pi").unwrap();
        assert_relative_eq!(kappa_hz.value, 120.0, max_relative = 0.02);
        assert!(kappa_hz.ci_low <= kappa_hz.value && kappa_hz.value <= kappa_hz.ci_high);
        // closed-form check at t = 1/kappa
        let t_us = 1e6 / params.kappa;
        let near = run
            .points
            .iter()
            .min_by(|a, b| {
                (a.sweep_value - t_us).abs().total_cmp(&(b.sweep_value - t_us).abs())
            })
            .unwrap();
        let expect = (-9.0 * (-near.sweep_value / t_us).exp()).exp();
        assert_abs_diff_eq!(near.observable, expect, epsilon = 0.01);
    }

    #[test]
    fn coherent_decay_is_flat_without_loss() {
        let mut params = quiet_params();
        params.kappa = 0.0;
        let mut config = ExperimentConfig::exact("coherent-decay", 1);
        config.sweep = Some(vec![10.0, 100.0, 400.0]);
        let (sig, _) = vacuum(16);
        let sim = Simulator::new(&params, sig.clone()).unwrap();
        let storage = coherent_state(C64::new(2.0, 0.0), 16).unwrap();
        let qubit = DensityMatrix::fock(SpaceSignature::new(&[2]).unwrap(), &[0]).unwrap();
        let rho0 = DensityMatrix::new_unchecked(
            sig,
            linalg::kron(&storage.entries, &qubit.entries),
        );
        let pv =
            sweep_delays(&sim, &rho0, &[10.0, 100.0, 400.0], |_, rho| {
                Ok(storage_population(&rho, 0))
            })
            .unwrap();
        for p in pv {
            assert_abs_diff_eq!(p, (-4.0f64).exp(), epsilon = 2e-6);
        }
    }

    #[test]
    fn fock_t1_matches_configured_kappa() {
        let params = SystemParams::paper_defaults();
        let config = ExperimentConfig::exact("fock-t1", 2);
        let run = fock_t1(&config, &params).unwrap();
        let t1 = run.fit.param("t1").unwrap().value;
        assert_relative_eq!(t1, 1.326, max_relative = 0.05);

        // doubling kappa halves T1
        let mut fast = params.clone();
        fast.kappa *= 2.0;
        let run2 = fock_t1(&config, &fast).unwrap();
        assert_relative_eq!(run2.fit.param("t1").unwrap().value, t1 / 2.0, max_relative = 0.05);
    }

    #[test]
    fn fock_t1_with_purcell_channel() {
        let mut params = SystemParams::paper_defaults();
        params.kappa += params.gamma / 609.0;
        let config = ExperimentConfig::exact("fock-t1", 2);
        let run = fock_t1(&config, &params).unwrap();
        // 1 / (kappa + gamma / 609) with the paper numbers
        let expect_ms = 1e3 / params.kappa;
        assert_relative_eq!(run.fit.param("t1").unwrap().value, expect_ms, max_relative = 0.05);
        assert_relative_eq!(expect_ms, 0.977, max_relative = 0.01);
    }

    #[test]
    fn ramsey_matches_analytic_t2() {
        let params = SystemParams::paper_defaults();
        let config = ExperimentConfig::exact("ramsey", 3);
        let run = ramsey_t2(&config, &params).unwrap();
        let t2 = run.fit.param("t2").unwrap().value;
        let expect = expected_t2_us(&params) * 1e-3;
        assert_relative_eq!(t2, expect, max_relative = 0.10);
        // fringe frequency should come back at the programmed 2 kHz
        let omega = run.fit.param("omega").unwrap().value; // rad/ms
        assert_relative_eq!(omega, TWO_PI * 2.0, max_relative = 0.05);
    }

    #[test]
    fn ramsey_lifetime_limit_without_dephasing() {
        let params = quiet_params();
        let config = ExperimentConfig::exact("ramsey", 4);
        let run = ramsey_t2(&config, &params).unwrap();
        let t2_ms = run.fit.param("t2").unwrap().value;
        let t1_ms = 1e3 / params.kappa;
        assert_relative_eq!(t2_ms, 2.0 * t1_ms, max_relative = 0.10);
    }

    #[test]
    fn ramsey_rejects_aliased_grid() {
        let params = SystemParams::paper_defaults();
        let mut config = ExperimentConfig::exact("ramsey", 5);
        // pi/omega = 250 us at the 2 kHz default
        config.sweep = Some(vec![10.0, 600.0, 1200.0]);
        assert!(matches!(
            ramsey_t2(&config, &params),
            Err(ExperimentError::Aliasing { .. })
        ));
    }

    #[test]
    fn spectroscopy_poisson_areas_dissipationless() {
        let params = quiet_params();
        let mut lossless = params.clone();
        lossless.kappa = 0.0;
        let dim = 10;
        let (sig, _) = vacuum(dim);
        let sim = Simulator::new(&lossless, sig.clone()).unwrap();
        let storage = coherent_state(C64::new(1.0, 0.0), dim).unwrap();
        let qubit = DensityMatrix::fock(SpaceSignature::new(&[2]).unwrap(), &[0]).unwrap();
        let state = DensityMatrix::new_unchecked(
            sig,
            linalg::kron(&storage.entries, &qubit.entries),
        );
        let spec = qubit_spectroscopy(&state, &lossless, &sim, 5).unwrap();
        let e = std::f64::consts::E;
        let poisson = [1.0 / e, 1.0 / e, 0.5 / e, 1.0 / (6.0 * e), 1.0 / (24.0 * e)];
        for (got, want) in spec.populations.iter().zip(poisson) {
            assert_abs_diff_eq!(got, &want, epsilon = 0.02);
        }
        assert_abs_diff_eq!(spec.detunings_hz[2], -2.0 * params.chi_sq_hz, epsilon = 1.0);
    }

    #[test]
    fn spectroscopy_vacuum_single_peak() {
        let mut params = quiet_params();
        params.kappa = 0.0;
        let (sig, state) = vacuum(8);
        let sim = Simulator::new(&params, sig).unwrap();
        let spec = qubit_spectroscopy(&state, &params, &sim, 4).unwrap();
        assert!(spec.populations[0] > 0.95, "vacuum weight {:?}", spec.populations);
    }

    #[test]
    fn spectroscopy_fock_prep_with_paper_decoherence() {
        // goldens are the measured number distribution after the as-run
        // (uncorrected) preparation, so the residual AC-Stark phases and
        // qubit decoherence both contribute to the degradation
        let params = SystemParams::paper_defaults();
        let (sig, rho_vac) = vacuum(FOCK_STORAGE_DIM);
        let sim = Simulator::new(&params, sig).unwrap();
        let prep =
            control_pulses::fock_one_sequence_uncorrected(&params, FOCK_STORAGE_DIM).unwrap();
        let state = sim.evolve(&rho_vac, &prep).unwrap().final_state().clone();
        let spec = qubit_spectroscopy(&state, &params, &sim, 3).unwrap();
        assert_abs_diff_eq!(spec.populations[0], 0.21, epsilon = 0.10);
        assert_abs_diff_eq!(spec.populations[1], 0.75, epsilon = 0.10);
        assert_abs_diff_eq!(spec.populations[2], 0.04, epsilon = 0.10);
    }

    #[test]
    fn spectroscopy_superposition_prep_with_paper_decoherence() {
        let params = SystemParams::paper_defaults();
        let (sig, rho_vac) = vacuum(FOCK_STORAGE_DIM);
        let sim = Simulator::new(&params, sig).unwrap();
        let prep =
            control_pulses::superposition_sequence_uncorrected(&params, FOCK_STORAGE_DIM)
                .unwrap();
        let state = sim.evolve(&rho_vac, &prep).unwrap().final_state().clone();
        let spec = qubit_spectroscopy(&state, &params, &sim, 3).unwrap();
        assert_abs_diff_eq!(spec.populations[0], 0.49, epsilon = 0.10);
        assert_abs_diff_eq!(spec.populations[1], 0.41, epsilon = 0.10);
        assert_abs_diff_eq!(spec.populations[2], 0.10, epsilon = 0.10);
    }

    #[test]
    fn temperature_sweep_recovers_ratio_and_kappa0() {
        let base = SystemParams::paper_defaults();
        let gamma_model = GammaVsTemperature::paper_default(base.gamma);
        let kappa0 = Kappa0VsTemperature::constant(500.0);
        let config = ExperimentConfig::exact("temp-sweep", 6);
        let res =
            temperature_sweep(&config, &base, &gamma_model, &kappa0, 1.0 / 650.0, false).unwrap();
        let ratio = res.fit.param("ratio").unwrap().value;
        let k0 = res.fit.param("kappa0").unwrap().value;
        assert_relative_eq!(ratio, 1.0 / 650.0, max_relative = 0.05);
        assert_relative_eq!(k0, 500.0, max_relative = 0.05);

        // trend subtraction on trendless data barely moves the ratio
        let res2 =
            temperature_sweep(&config, &base, &gamma_model, &kappa0, 1.0 / 650.0, true).unwrap();
        let ratio2 = res2.fit.param("ratio").unwrap().value;
        assert_relative_eq!(ratio2, ratio, max_relative = 0.02);

        // zero hybridization: flat slope
        let res3 =
            temperature_sweep(&config, &base, &gamma_model, &kappa0, 0.0, false).unwrap();
        assert!(res3.fit.param("ratio").unwrap().value.abs() < 1e-5);
    }

    #[test]
    fn temperature_sweep_needs_three_points() {
        let base = SystemParams::paper_defaults();
        let gamma_model = GammaVsTemperature::paper_default(base.gamma);
        let kappa0 = Kappa0VsTemperature::constant(500.0);
        let mut config = ExperimentConfig::exact("temp-sweep", 6);
        config.sweep = Some(vec![0.02, 0.1]);
        assert!(matches!(
            temperature_sweep(&config, &base, &gamma_model, &kappa0, 1.0 / 650.0, false),
            Err(ExperimentError::TooFewTemperatures(2))
        ));
    }

    #[test]
    fn gamma_model_quadruples_at_calibration_point() {
        let m = GammaVsTemperature::paper_default(1322.0);
        assert_relative_eq!(m.gamma_per_s(0.18), 4.0 * 1322.0, max_relative = 1e-9);
        assert_relative_eq!(m.gamma_per_s(0.02), 1322.0, max_relative = 1e-9);
    }

    #[test]
    fn pe_sweep_tracks_exact_dephasing() {
        let base = SystemParams::paper_defaults();
        let mut config = ExperimentConfig::exact("pe-sweep", 7);
        config.sweep = Some(vec![0.0, 0.008, 0.016]);
        let points = pe_sweep(&config, &base).unwrap();
        // intercept: no qubit heating leaves only regression noise
        let intercept = &points[0];
        assert!(
            intercept.gamma_phi_per_s.abs() < 0.1 * points[1].gamma_phi_exact_per_s,
            "intercept {} too large",
            intercept.gamma_phi_per_s
        );
        for p in &points[1..] {
            assert_relative_eq!(p.gamma_phi_per_s, p.gamma_phi_exact_per_s, max_relative = 0.10);
        }
        // approximate linearity in P_e
        assert_relative_eq!(
            points[2].gamma_phi_per_s,
            2.0 * points[1].gamma_phi_per_s,
            max_relative = 0.10
        );
    }

    #[test]
    fn sample_iq_statistics() {
        let (recs, est) = sample_iq(0.008, 100_000, 6.0, 42);
        assert_eq!(recs.len(), 100_000);
        assert_abs_diff_eq!(est, 0.008, epsilon = 0.0015);
        let (_, half) = sample_iq(0.5, 100_000, 6.0, 43);
        assert_abs_diff_eq!(half, 0.5, epsilon = 0.005);
        let (_, zero) = sample_iq(0.0, 10_000, 60.0, 44);
        assert_eq!(zero, 0.0);
        // determinism
        let (r1, e1) = sample_iq(0.1, 1000, 6.0, 7);
        let (r2, e2) = sample_iq(0.1, 1000, 6.0, 7);
        assert_eq!(e1, e2);
        assert_eq!(r1[0].i_m, r2[0].i_m);
    }

    #[test]
    fn exact_and_sampled_modes_agree() {
        let params = SystemParams::paper_defaults();
        let mut exact_cfg = ExperimentConfig::exact("fock-t1", 8);
        let sweep = default_delay_grid_us(1e6 / params.kappa, 12);
        exact_cfg.sweep = Some(sweep.clone());
        exact_cfg.bootstrap_resamples = 100;
        let mut sampled_cfg = ExperimentConfig::sampled("fock-t1", 8, 20_000);
        sampled_cfg.sweep = Some(sweep);
        sampled_cfg.bootstrap_resamples = 100;
        let exact = fock_t1(&exact_cfg, &params).unwrap();
        let sampled = fock_t1(&sampled_cfg, &params).unwrap();
        for (a, b) in exact.points.iter().zip(&sampled.points) {
            let se = (a.observable.max(1e-9) * (1.0 - a.observable).max(1e-9) / 20_000.0).sqrt();
            assert!(
                (a.observable - b.observable).abs() <= 3.0 * se + 1e-3,
                "exact {} vs sampled {} at t = {}",
                a.observable,
                b.observable,
                a.sweep_value
            );
        }
    }

    #[test]
    fn determinism_and_csv_shape() {
        let params = SystemParams::paper_defaults();
        let mut cfg = ExperimentConfig::sampled("fock-t1", 9, 2_000);
        cfg.sweep = Some(default_delay_grid_us(1e6 / params.kappa, 12));
        cfg.bootstrap_resamples = 50;
        let a = fock_t1(&cfg, &params).unwrap();
        let b = fock_t1(&cfg, &params).unwrap();
        assert_eq!(sweep_csv(&a.points), sweep_csv(&b.points));
        let csv = sweep_csv(&a.points);
        assert!(csv.starts_with("sweep_value,observable,stderr\n"));
        assert_eq!(csv.lines().count(), 13);
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::exact("fock-t1", 0);
        cfg.sweep = Some(vec![]);
        assert!(cfg.validate().is_err());
        cfg.sweep = Some(vec![2.0, 1.0]);
        assert!(cfg.validate().is_err());
        cfg.sweep = None;
        cfg.readout = ReadoutMode::SampledIq;
        cfg.shots = 0;
        assert!(cfg.validate().is_err());
    }
}
