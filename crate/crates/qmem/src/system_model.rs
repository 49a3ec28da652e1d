//! Physical parameters of the cavity-qubit-readout system and the builders
//! for its Hamiltonian, collapse channels, and junction quantities.
//!
//! Unit conventions: configuration and public parameter fields carry
//! ordinary frequencies in Hz and decay rates in 1/s (angular). Internally
//! the simulation uses time in microseconds and angular rates in rad/us;
//! the builders convert on the way in.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::C64;
use crate::operator_core::{
    annihilation, embed, number, OperatorError, OperatorMatrix, SpaceSignature,
};

pub const TWO_PI: f64 = std::f64::consts::TAU;
/// Magnetic flux quantum (Wb).
pub const PHI_0: f64 = 2.067833848e-15;
/// Elementary charge (C).
pub const E_CHARGE: f64 = 1.602176634e-19;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380649e-23;

/// Ordinary frequency in Hz -> angular rate in rad/us.
pub fn hz_to_rad_per_us(f_hz: f64) -> f64 {
    TWO_PI * f_hz * 1e-6
}

/// Rate in 1/s -> 1/us.
pub fn per_s_to_per_us(r: f64) -> f64 {
    r * 1e-6
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("thermal population P_e = {0} must satisfy 0 <= P_e < 0.5")]
    InvalidPopulation(f64),
    #[error("signature has {0} modes; the system model supports 2 or 3")]
    UnsupportedSignature(usize),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// All Hamiltonian and dissipation parameters of the coupled system.
///
/// Frequencies and Kerr/cross-Kerr shifts are ordinary Hz; `kappa`,
/// `kappa_ext`, `gamma`, `gamma_phi_q`, `kappa_r`, and `gamma_phi_0` are
/// angular rates in 1/s.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemParams {
    pub omega_s_hz: f64,
    pub omega_q_hz: f64,
    pub omega_r_hz: f64,
    pub chi_sq_hz: f64,
    pub chi_rq_hz: f64,
    pub chi_sr_hz: f64,
    pub k_s_hz: f64,
    pub k_q_hz: f64,
    pub k_r_hz: f64,
    /// Storage energy decay rate (1/s).
    pub kappa: f64,
    /// External coupling rate of the storage mode (1/s).
    pub kappa_ext: f64,
    /// Qubit energy decay rate 1/T1q (1/s).
    pub gamma: f64,
    /// Qubit pure dephasing rate 1/T2q - 1/(2 T1q) (1/s).
    pub gamma_phi_q: f64,
    /// Qubit thermal excited-state population.
    pub p_e: f64,
    /// Readout mode decay rate (1/s).
    pub kappa_r: f64,
    /// Intrinsic cavity dephasing rate (1/s).
    pub gamma_phi_0: f64,
}

/// JSON parameter schema. Keys are exactly the documented set; frequencies
/// in Hz, times in seconds.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub omega_s_hz: f64,
    pub omega_q_hz: f64,
    pub omega_r_hz: f64,
    pub chi_sq_hz: f64,
    pub chi_rq_hz: f64,
    pub chi_sr_hz: f64,
    pub k_s_hz: f64,
    pub k_q_hz: f64,
    pub k_r_hz: f64,
    pub kappa_hz: f64,
    pub t1q_s: f64,
    pub t2q_s: f64,
    pub p_e: f64,
    pub gamma_phi0_hz: f64,
}

impl SystemConfig {
    pub fn paper() -> Self {
        Self {
            omega_s_hz: 4.250e9,
            omega_q_hz: 7.906e9,
            omega_r_hz: 9.777e9,
            chi_sq_hz: 4.99e5,
            chi_rq_hz: 8.25e5,
            chi_sr_hz: 1.60e3,
            k_s_hz: 4.50e2,
            k_q_hz: 1.46e8,
            k_r_hz: 1.20e3,
            kappa_hz: 120.0,
            t1q_s: 6.1e-6,
            t2q_s: 10.0e-6,
            p_e: 0.008,
            gamma_phi0_hz: 0.0,
        }
    }

    pub fn into_params(self) -> Result<SystemParams, ModelError> {
        if self.t1q_s <= 0.0 || self.t2q_s <= 0.0 {
            return Err(ModelError::InvalidParams("T1q and T2q must be positive".into()));
        }
        if self.t2q_s > 2.0 * self.t1q_s + 1e-15 {
            return Err(ModelError::InvalidParams(format!(
                "T2q = {} exceeds 2 T1q = {}",
                self.t2q_s,
                2.0 * self.t1q_s
            )));
        }
        let gamma = 1.0 / self.t1q_s;
        let gamma_phi_q = (1.0 / self.t2q_s - 0.5 * gamma).max(0.0);
        let params = SystemParams {
            omega_s_hz: self.omega_s_hz,
            omega_q_hz: self.omega_q_hz,
            omega_r_hz: self.omega_r_hz,
            chi_sq_hz: self.chi_sq_hz,
            chi_rq_hz: self.chi_rq_hz,
            chi_sr_hz: self.chi_sr_hz,
            k_s_hz: self.k_s_hz,
            k_q_hz: self.k_q_hz,
            k_r_hz: self.k_r_hz,
            kappa: TWO_PI * self.kappa_hz,
            kappa_ext: TWO_PI * 1.0,
            gamma,
            gamma_phi_q,
            p_e: self.p_e,
            kappa_r: 0.0,
            gamma_phi_0: TWO_PI * self.gamma_phi0_hz,
        };
        params.validate()?;
        Ok(params)
    }
}

impl SystemParams {
    /// Table-of-the-paper defaults: experiment column of the parameter
    /// table plus kappa/2pi = 120 Hz, T1q = 6.1 us, T2q = 10 us,
    /// P_e = 0.008.
    pub fn paper_defaults() -> Self {
        SystemConfig::paper().into_params().expect("paper defaults are valid")
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let rates = [
            ("kappa", self.kappa),
            ("kappa_ext", self.kappa_ext),
            ("gamma", self.gamma),
            ("gamma_phi_q", self.gamma_phi_q),
            ("kappa_r", self.kappa_r),
            ("gamma_phi_0", self.gamma_phi_0),
        ];
        for (name, r) in rates {
            if r < 0.0 || !r.is_finite() {
                return Err(ModelError::InvalidParams(format!("{name} = {r} must be >= 0")));
            }
        }
        if !(0.0..0.5).contains(&self.p_e) {
            return Err(ModelError::InvalidPopulation(self.p_e));
        }
        // protocols assume the strong dispersive regime
        if TWO_PI * self.chi_sq_hz <= self.gamma {
            return Err(ModelError::InvalidParams(format!(
                "not in the strong dispersive regime: 2*pi*chi_sq = {:.3e} <= gamma = {:.3e}",
                TWO_PI * self.chi_sq_hz,
                self.gamma
            )));
        }
        Ok(())
    }

    /// Thermal excitation rate Gamma_up = gamma * P_e / (1 - P_e) (1/s),
    /// chosen so the two-level steady state sits at exactly P_e.
    pub fn gamma_up(&self) -> f64 {
        self.gamma * self.p_e / (1.0 - self.p_e)
    }

    /// Stable hash of the parameter set, used to key propagator caches.
    pub fn cache_key(&self) -> u64 {
        let fields = [
            self.omega_s_hz,
            self.omega_q_hz,
            self.omega_r_hz,
            self.chi_sq_hz,
            self.chi_rq_hz,
            self.chi_sr_hz,
            self.k_s_hz,
            self.k_q_hz,
            self.k_r_hz,
            self.kappa,
            self.kappa_ext,
            self.gamma,
            self.gamma_phi_q,
            self.p_e,
            self.kappa_r,
            self.gamma_phi_0,
        ];
        let mut h = 0xcbf29ce484222325u64;
        for f in fields {
            h ^= f.to_bits();
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}

/// Which frame a frequency is quoted in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Laboratory,
    Rotating,
}

/// Dispersive/Kerr Hamiltonian in the each-mode co-rotating frame, in
/// rad/us. The linear terms vanish by the frame choice; what remains is
///   -2pi [ chi_sq n_a n_b + chi_rq n_b n_c + chi_sr n_a n_c
///          + (K_s/2) a†a†aa + (K_q/2) b†b†bb + (K_r/2) c†c†cc ].
pub fn build_hamiltonian(
    params: &SystemParams,
    signature: &SpaceSignature,
) -> Result<OperatorMatrix, ModelError> {
    let n_modes = signature.n_modes();
    if !(2..=3).contains(&n_modes) {
        return Err(ModelError::UnsupportedSignature(n_modes));
    }
    let dims = signature.dims().to_vec();
    let n_a = embed(&number(dims[0])?, 0, signature)?;
    let n_b = embed(&number(dims[1])?, 1, signature)?;
    let kerr = |dim: usize, mode: usize| -> Result<OperatorMatrix, ModelError> {
        let a = annihilation(dim)?;
        let a2 = a.dot(&a)?;
        Ok(embed(&a2.dagger().dot(&a2)?, mode, signature)?)
    };

    let r = |f_hz: f64| C64::new(-hz_to_rad_per_us(f_hz), 0.0);
    let mut h = n_a.dot(&n_b)?.scale(r(params.chi_sq_hz));
    h = h.add(&kerr(dims[0], 0)?.scale(r(params.k_s_hz / 2.0)))?;
    h = h.add(&kerr(dims[1], 1)?.scale(r(params.k_q_hz / 2.0)))?;
    if n_modes == 3 {
        let n_c = embed(&number(dims[2])?, 2, signature)?;
        h = h.add(&n_b.dot(&n_c)?.scale(r(params.chi_rq_hz)))?;
        h = h.add(&n_a.dot(&n_c)?.scale(r(params.chi_sr_hz)))?;
        h = h.add(&kerr(dims[2], 2)?.scale(r(params.k_r_hz / 2.0)))?;
    }
    Ok(h)
}

/// Qubit transition frequency (Hz) when the storage cavity holds
/// `n_storage` photons: omega_q - n*chi_sq in the laboratory frame,
/// -n*chi_sq in the rotating frame.
pub fn qubit_transition_frequency(params: &SystemParams, n_storage: usize, frame: Frame) -> f64 {
    let shift = -(n_storage as f64) * params.chi_sq_hz;
    match frame {
        Frame::Laboratory => params.omega_q_hz + shift,
        Frame::Rotating => shift,
    }
}

/// A Lindblad jump operator together with its rate (1/s).
#[derive(Debug, Clone)]
pub struct CollapseChannel {
    pub operator: OperatorMatrix,
    pub rate: f64,
}

/// Collapse channels for the configured decoherence model: photon loss
/// sqrt(kappa) a, qubit decay sqrt(gamma) b, thermal excitation
/// sqrt(Gamma_up) b†, qubit pure dephasing sqrt(2 gamma_phi_q) b†b,
/// intrinsic cavity dephasing sqrt(2 Gamma_phi0) a†a, and readout decay
/// sqrt(kappa_r) c when the signature carries a third mode. Channels with
/// zero rate are omitted.
pub fn collapse_channels(
    params: &SystemParams,
    signature: &SpaceSignature,
) -> Result<Vec<CollapseChannel>, ModelError> {
    params.validate()?;
    let n_modes = signature.n_modes();
    if !(2..=3).contains(&n_modes) {
        return Err(ModelError::UnsupportedSignature(n_modes));
    }
    let dims = signature.dims().to_vec();
    let a = embed(&annihilation(dims[0])?, 0, signature)?;
    let b = embed(&annihilation(dims[1])?, 1, signature)?;
    let mut channels = Vec::new();
    let mut push = |op: OperatorMatrix, rate: f64| {
        if rate > 0.0 {
            channels.push(CollapseChannel { operator: op, rate });
        }
    };
    push(a.clone(), params.kappa);
    push(b.clone(), params.gamma);
    push(b.dagger(), params.gamma_up());
    push(embed(&number(dims[1])?, 1, signature)?, 2.0 * params.gamma_phi_q);
    push(embed(&number(dims[0])?, 0, signature)?, 2.0 * params.gamma_phi_0);
    if n_modes == 3 {
        push(embed(&annihilation(dims[2])?, 2, signature)?, params.kappa_r);
    }
    Ok(channels)
}

/// Josephson energy in ueV from the junction inductance in henry:
/// E_J = (Phi_0 / 2pi)^2 / L_J.
pub fn josephson_energy_uev(l_j_henry: f64) -> Result<f64, ModelError> {
    if l_j_henry <= 0.0 {
        return Err(ModelError::InvalidParams(format!("L_J = {l_j_henry} must be > 0")));
    }
    let e_j_joule = (PHI_0 / TWO_PI).powi(2) / l_j_henry;
    Ok(e_j_joule / E_CHARGE * 1e6)
}

/// Junction inductance (henry) from the normal-state resistance (ohm) and
/// the superconducting gap (ueV), via Ambegaokar-Baratoff:
/// I_c = pi*Delta/(2 e R_n), L_J = Phi_0/(2 pi I_c).
pub fn l_j_from_resistance(r_n_ohm: f64, gap_uev: f64) -> Result<f64, ModelError> {
    if r_n_ohm <= 0.0 || gap_uev <= 0.0 {
        return Err(ModelError::InvalidParams(
            "resistance and gap must be positive".into(),
        ));
    }
    let gap_volt = gap_uev * 1e-6;
    let i_c = std::f64::consts::PI * gap_volt / (2.0 * r_n_ohm);
    Ok(PHI_0 / (TWO_PI * i_c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn paper_defaults_validate() {
        let p = SystemParams::paper_defaults();
        assert_abs_diff_eq!(p.kappa, TWO_PI * 120.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.gamma, 1.0 / 6.1e-6, epsilon = 1e-3);
        // gamma_phi_q reproduces T2q = 10 us
        let t2 = 1.0 / (0.5 * p.gamma + p.gamma_phi_q);
        assert_abs_diff_eq!(t2, 10e-6, epsilon = 1e-12);
    }

    #[test]
    fn gamma_up_matches_detailed_balance() {
        let p = SystemParams::paper_defaults();
        assert_abs_diff_eq!(p.gamma_up(), 1.322e3, epsilon = 1.0);
        // two-level steady state gamma_up/(gamma + gamma_up) = P_e exactly
        let pop = p.gamma_up() / (p.gamma + p.gamma_up());
        assert_abs_diff_eq!(pop, p.p_e, epsilon = 1e-15);
    }

    #[test]
    fn invalid_population_rejected() {
        let mut p = SystemParams::paper_defaults();
        p.p_e = 0.5;
        assert!(matches!(p.validate(), Err(ModelError::InvalidPopulation(_))));
    }

    #[test]
    fn hamiltonian_zero_when_couplings_vanish() {
        let mut p = SystemParams::paper_defaults();
        p.chi_sq_hz = 1.0; // keep the dispersive check satisfied
        p.gamma = 1.0;
        p.k_s_hz = 0.0;
        p.k_q_hz = 0.0;
        p.chi_sq_hz = 0.0;
        let sig = SpaceSignature::new(&[4, 2]).unwrap();
        let h = build_hamiltonian(&p, &sig).unwrap();
        assert_abs_diff_eq!(crate::linalg::max_abs(&h.entries), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn hamiltonian_dispersive_shift_matches_table() {
        let p = SystemParams::paper_defaults();
        let sig = SpaceSignature::new(&[4, 2]).unwrap();
        let h = build_hamiltonian(&p, &sig).unwrap();
        assert!(h.is_diagonal(1e-14));
        // E(1s,e) - E(1s,g) - E(0s,e) = -2pi chi_sq (rad/us internal units)
        let e = |ns: usize, nq: usize| h.entries[[sig.ravel(&[ns, nq]), sig.ravel(&[ns, nq])]].re;
        let shift = e(1, 1) - e(1, 0) - e(0, 1);
        assert_abs_diff_eq!(shift, -hz_to_rad_per_us(4.99e5), epsilon = 1e-12);
    }

    #[test]
    fn hamiltonian_transmon_f_level_offset() {
        let p = SystemParams::paper_defaults();
        let sig = SpaceSignature::new(&[2, 3]).unwrap();
        let h = build_hamiltonian(&p, &sig).unwrap();
        // |f> = qubit level 2: the b†b†bb term contributes -2pi K_q
        let idx = sig.ravel(&[0, 2]);
        assert_abs_diff_eq!(
            h.entries[[idx, idx]].re,
            -hz_to_rad_per_us(1.46e8),
            epsilon = 1e-9
        );
    }

    #[test]
    fn hamiltonian_is_diagonal_in_fock_basis() {
        let p = SystemParams::paper_defaults();
        let sig = SpaceSignature::new(&[3, 2, 2]).unwrap();
        let h = build_hamiltonian(&p, &sig).unwrap();
        assert!(h.is_diagonal(1e-14));
        // Hermitian to 1e-12
        let diff = &h.entries - &crate::linalg::dagger(&h.entries);
        assert!(crate::linalg::max_abs(&diff) < 1e-12);
    }

    #[test]
    fn qubit_transition_frequency_ladder() {
        let p = SystemParams::paper_defaults();
        assert_abs_diff_eq!(
            qubit_transition_frequency(&p, 0, Frame::Laboratory),
            p.omega_q_hz,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(
            qubit_transition_frequency(&p, 1, Frame::Laboratory),
            p.omega_q_hz - 4.99e5,
            epsilon = 1e-6
        );
        // equal spacing chi_sq for all n
        for n in 0..5 {
            let spacing = qubit_transition_frequency(&p, n, Frame::Rotating)
                - qubit_transition_frequency(&p, n + 1, Frame::Rotating);
            assert_abs_diff_eq!(spacing, p.chi_sq_hz, epsilon = 1e-9);
        }
    }

    #[test]
    fn collapse_channel_set_matches_model() {
        let p = SystemParams::paper_defaults();
        let sig = SpaceSignature::new(&[3, 2]).unwrap();
        let ch = collapse_channels(&p, &sig).unwrap();
        // kappa a, gamma b, gamma_up b†, 2 gamma_phi_q b†b (gamma_phi_0 = 0)
        assert_eq!(ch.len(), 4);
        assert_abs_diff_eq!(ch[0].rate, p.kappa, epsilon = 1e-12);
        assert_eq!(ch[0].operator.ladder_offset(), Some(vec![-1, 0]));
        assert_eq!(ch[1].operator.ladder_offset(), Some(vec![0, -1]));
        assert_eq!(ch[2].operator.ladder_offset(), Some(vec![0, 1]));
        assert_abs_diff_eq!(ch[2].rate, p.gamma_up(), epsilon = 1e-9);
        assert_eq!(ch[3].operator.ladder_offset(), Some(vec![0, 0]));

        // P_e = 0 removes the thermal channel
        let mut p0 = p.clone();
        p0.p_e = 0.0;
        let ch0 = collapse_channels(&p0, &sig).unwrap();
        assert_eq!(ch0.len(), 3);
    }

    #[test]
    fn josephson_energy_from_inductance() {
        let e_j = josephson_energy_uev(4.5e-9).unwrap();
        assert!((e_j - 150.6).abs() / 150.6 < 0.01, "E_J = {e_j}");
        // inverse proportionality
        let e_j_10 = josephson_energy_uev(45e-9).unwrap();
        assert_abs_diff_eq!(e_j_10, e_j / 10.0, epsilon = 1e-9);
        assert!(josephson_energy_uev(0.0).is_err());
    }

    #[test]
    fn junction_inductance_from_resistance() {
        let l_j = l_j_from_resistance(3.5e3, 180.0).unwrap();
        assert!((l_j - 4.1e-9).abs() < 0.1e-9, "L_J = {l_j}");
        assert!(l_j_from_resistance(-1.0, 180.0).is_err());
    }

    #[test]
    fn config_roundtrip_and_unknown_key() {
        let cfg = SystemConfig::paper();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: SystemConfig = serde_json::from_str(&json).unwrap();
        assert_abs_diff_eq!(back.kappa_hz, 120.0, epsilon = 1e-12);
        // missing key errors name the key
        let err = serde_json::from_str::<SystemConfig>("{\"omega_s_hz\": 1.0}").unwrap_err();
        assert!(err.to_string().contains("omega_q_hz"));
    }
}
