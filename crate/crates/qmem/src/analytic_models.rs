//! Closed-form decoherence and coupling models.
//!
//! These are the fast analytic predictions the simulator is checked against.
//! All public functions take ordinary frequencies in Hz and rates in 1/s;
//! angular conversion happens internally.

use num_complex::Complex64;
use thiserror::Error;

use crate::system_model::TWO_PI;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticError {
    #[error("degenerate detuning: {0}")]
    DegenerateDetuning(String),
    #[error("inconsistent rates: T2 = {t2_ms} ms exceeds 2*T1 = {limit_ms} ms")]
    InconsistentRates { t2_ms: f64, limit_ms: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// The full decoherence ledger of the memory mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceBudget {
    pub t1_ms: f64,
    pub t2_ms: f64,
    pub t_phi_ms: f64,
    /// Intrinsic cavity decay (1/s).
    pub kappa_0: f64,
    /// Inverse-Purcell decay inherited from the qubit (1/s).
    pub kappa_q: f64,
    pub kappa_tot: f64,
    /// Shot-noise dephasing rate (1/s).
    pub gamma_phi: f64,
    /// Intrinsic dephasing (1/s).
    pub gamma_phi_0: f64,
    pub g_hz: f64,
    pub delta_hz: f64,
}

impl DecoherenceBudget {
    /// Assemble the budget from rates; T1/T2/T_phi are derived so the
    /// composition law 1/T2 = 1/(2 T1) + 1/T_phi holds exactly.
    pub fn from_rates(
        kappa_0: f64,
        kappa_q: f64,
        gamma_phi: f64,
        gamma_phi_0: f64,
        g_hz: f64,
        delta_hz: f64,
    ) -> Result<Self, AnalyticError> {
        if kappa_0 <= 0.0 {
            return Err(AnalyticError::InvalidArgument(format!("kappa_0 = {kappa_0} <= 0")));
        }
        let kappa_tot = kappa_0 + kappa_q;
        let phi_rate = gamma_phi + gamma_phi_0;
        let t1_s = 1.0 / kappa_tot;
        let t2_s = 1.0 / (kappa_tot / 2.0 + phi_rate);
        let t_phi_s = if phi_rate > 0.0 { 1.0 / phi_rate } else { f64::INFINITY };
        Ok(Self {
            t1_ms: t1_s * 1e3,
            t2_ms: t2_s * 1e3,
            t_phi_ms: t_phi_s * 1e3,
            kappa_0,
            kappa_q,
            kappa_tot,
            gamma_phi,
            gamma_phi_0,
            g_hz,
            delta_hz,
        })
    }
}

/// Probability of finding an initially coherent cavity back in vacuum after
/// free decay: P_vac(t) = exp(-|beta_0|^2 e^{-kappa t}).
pub fn vacuum_return_probability(t_s: f64, beta0: f64, kappa: f64) -> f64 {
    debug_assert!(t_s >= 0.0);
    (-(beta0 * beta0) * (-kappa * t_s).exp()).exp()
}

/// Decay rate the cavity inherits from the qubit: kappa_q = (g/Delta)^2 gamma.
pub fn inverse_purcell(g_hz: f64, delta_hz: f64, gamma: f64) -> Result<f64, AnalyticError> {
    if delta_hz == 0.0 {
        return Err(AnalyticError::DegenerateDetuning("Delta = 0".into()));
    }
    let r = g_hz / delta_hz;
    Ok(r * r * gamma)
}

/// Coupling strength from the transmon dispersive relation
/// chi = 2 g^2 alpha / (Delta (Delta - alpha)).
pub fn g_from_chi(chi_hz: f64, alpha_hz: f64, delta_hz: f64) -> Result<f64, AnalyticError> {
    if delta_hz == 0.0 {
        return Err(AnalyticError::DegenerateDetuning("Delta = 0".into()));
    }
    if delta_hz == alpha_hz {
        return Err(AnalyticError::DegenerateDetuning("Delta = alpha".into()));
    }
    let g_sq = chi_hz * delta_hz * (delta_hz - alpha_hz) / (2.0 * alpha_hz);
    if g_sq < 0.0 {
        return Err(AnalyticError::InvalidArgument(format!(
            "dispersive relation gives g^2 = {g_sq} < 0"
        )));
    }
    Ok(g_sq.sqrt())
}

/// Exact shot-noise dephasing rate of the cavity from thermal qubit jumps:
/// Gamma_phi = (gamma/2) Re[sqrt((1 + 2 i chi_ang/gamma)^2
///                              + 8 i chi_ang p_e / gamma) - 1].
pub fn dephasing_exact(chi_hz: f64, gamma: f64, p_e: f64) -> Result<f64, AnalyticError> {
    if gamma <= 0.0 {
        return Err(AnalyticError::InvalidArgument(format!("gamma = {gamma} <= 0")));
    }
    if !(0.0..1.0).contains(&p_e) {
        return Err(AnalyticError::InvalidArgument(format!("p_e = {p_e} outside [0, 1)")));
    }
    if p_e == 0.0 || chi_hz == 0.0 {
        return Ok(0.0);
    }
    let chi_ang = TWO_PI * chi_hz;
    let x = Complex64::new(1.0, 2.0 * chi_ang / gamma);
    let inner = x * x + Complex64::new(0.0, 8.0 * chi_ang * p_e / gamma);
    let rate = 0.5 * gamma * (inner.sqrt() - 1.0).re;
    Ok(rate.max(0.0))
}

/// Strong-dispersive approximation of the same rate: Gamma_phi = p_e * gamma.
pub fn dephasing_approx(gamma: f64, p_e: f64) -> f64 {
    p_e * gamma
}

/// T2 from T1 and a pure dephasing rate: 1/T2 = 1/(2 T1) + Gamma_phi.
pub fn t2_compose(t1_s: f64, gamma_phi: f64) -> f64 {
    1.0 / (0.5 / t1_s + gamma_phi)
}

/// Pure dephasing time from measured T1 and T2: 1/T_phi = 1/T2 - 1/(2 T1).
pub fn t_phi_from(t1_s: f64, t2_s: f64) -> Result<f64, AnalyticError> {
    let rate = 1.0 / t2_s - 0.5 / t1_s;
    if rate <= 0.0 {
        return Err(AnalyticError::InconsistentRates {
            t2_ms: t2_s * 1e3,
            limit_ms: 2.0 * t1_s * 1e3,
        });
    }
    Ok(1.0 / rate)
}
