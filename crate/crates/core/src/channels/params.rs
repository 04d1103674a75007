use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Sign applied to the Kerr and cross-Kerr terms of the dispersive Hamiltonian.
///
/// `Negative` reproduces `-K/2 a†²a² - chi a_q†a_q a_c†a_c`; the observables
/// modelled here do not resolve the convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KerrSign {
    #[default]
    Negative,
    Positive,
}

impl KerrSign {
    pub fn factor(self) -> f64 {
        match self {
            KerrSign::Negative => -1.0,
            KerrSign::Positive => 1.0,
        }
    }
}

/// Device parameters of the transmon / cavity / readout system.
///
/// Frequencies, Kerrs and linewidths are stored as `f = omega / 2pi` in Hz;
/// times in seconds. Defaults are the measured device values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    pub omega_q: f64,
    pub omega_c: f64,
    pub omega_r: f64,
    pub k_q: f64,
    pub k_c: f64,
    pub chi_qc: f64,
    pub chi_qr: f64,
    pub chi_qc_2: f64,
    pub t1_c: f64,
    pub t2r_c: f64,
    pub tphi_c: f64,
    pub t1_q: f64,
    pub t2r_q: f64,
    pub tphi_q: f64,
    pub kappa_r: f64,
    pub nth_c: f64,
    pub nth_q: f64,
    pub kerr_sign: KerrSign,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            omega_q: 5.249e9,
            omega_c: 6.592e9,
            omega_r: 8.540e9,
            k_q: 222.96e6,
            k_c: 3.98e3,
            chi_qc: 1.69e6,
            chi_qr: 1.01e6,
            chi_qc_2: 1.45e3,
            t1_c: 466e-6,
            t2r_c: 735e-6,
            tphi_c: 3073e-6,
            t1_q: 141e-6,
            t2r_q: 117e-6,
            tphi_q: 200e-6,
            kappa_r: 1.542e6,
            nth_c: 0.0072,
            nth_q: 0.0534,
            kerr_sign: KerrSign::Negative,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let times = [
            ("t1_c", self.t1_c),
            ("t2r_c", self.t2r_c),
            ("tphi_c", self.tphi_c),
            ("t1_q", self.t1_q),
            ("t2r_q", self.t2r_q),
            ("tphi_q", self.tphi_q),
        ];
        for (name, t) in times {
            if !(t > 0.0) {
                return Err(invalid(name, format!("coherence time must be > 0, got {t}")));
            }
        }
        for (name, n) in [("nth_c", self.nth_c), ("nth_q", self.nth_q)] {
            if !(0.0..1.0).contains(&n) {
                return Err(invalid(name, format!("thermal population must be in [0, 1), got {n}")));
            }
        }
        for (name, t1, t2) in [("t2r_c", self.t1_c, self.t2r_c), ("t2r_q", self.t1_q, self.t2r_q)] {
            if 1.0 / t2 < 1.0 / (2.0 * t1) - 1e-6 / t1 {
                return Err(invalid(name, format!("T2 = {t2} exceeds 2*T1 = {}", 2.0 * t1)));
            }
        }
        let finite = [
            self.omega_q,
            self.omega_c,
            self.omega_r,
            self.k_q,
            self.k_c,
            self.chi_qc,
            self.chi_qr,
            self.chi_qc_2,
            self.kappa_r,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(invalid("params", "frequencies must be finite"));
        }
        Ok(())
    }

    /// Cavity single-photon loss rate `1/T1_c` (1/s).
    pub fn kappa_c(&self) -> f64 {
        1.0 / self.t1_c
    }
}

/// Converts a cyclic frequency in Hz to angular frequency in rad/s.
pub fn angular(f_hz: f64) -> f64 {
    2.0 * PI * f_hz
}
