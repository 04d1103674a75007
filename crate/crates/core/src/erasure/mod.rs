//! The `{|0>, |2>}` erasure qubit: detection channel, idle cycles, the
//! closed-form relaxation law, qutrit rate equations and derived metrics.

mod analytic;
mod cycle;
mod idling;
mod rates;

pub use analytic::{
    analytic_p1l, analytic_p1l_cycles, channel_fidelity_decay, gain_factor,
    intrinsic_relaxation_rate, missed_erasure_probability,
};
pub(crate) use cycle::idle_channel;
pub use cycle::{code_projector, erasure_detection_channel, logical_x, CycleChannel, Protocol};
pub use idling::{
    simulate_cpmg, simulate_idling, simulate_idling_mc, simulate_ramsey, simulate_relaxation,
    IdlingResult, McIdling,
};
pub use rates::{erasure_bias_ratio, qutrit_rate_evolution, steady_state, QutritRates};

use serde::{Deserialize, Serialize};

use crate::channels::SystemParams;
use crate::error::{invalid, Result};
use crate::measure::DetectionErrorModel;

/// Physical effects included in the idle and check steps of a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CycleOptions {
    /// Thermal excitation `(a†, n_th/T1)` during idling.
    pub thermal: bool,
    /// Cavity pure dephasing at `T_phi` during idling.
    pub dephasing: bool,
    /// Checks use the detection error model instead of the ideal projector.
    pub detection_errors: bool,
    /// Photon loss continues during the check (idle for the full `T_cycle`).
    pub idle_during_check: bool,
    /// Keep only the no-jump Kraus operator of photon loss.
    pub no_jump_only: bool,
}

/// Erasure-qubit cycle configuration. Times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErasureQubitConfig {
    pub params: SystemParams,
    /// Idle interval between checks.
    pub tau: f64,
    /// Full cycle duration, idle plus check.
    pub t_cycle: f64,
    pub detection_errors: DetectionErrorModel,
    /// Fock truncation.
    pub dim: usize,
    pub options: CycleOptions,
    /// Also discard shots whose final logical readout lands outside the code
    /// space.
    pub postselect_final: bool,
}

impl Default for ErasureQubitConfig {
    fn default() -> Self {
        Self {
            params: SystemParams::default(),
            tau: 11.9e-6,
            t_cycle: 13.0e-6,
            detection_errors: DetectionErrorModel::default(),
            dim: 4,
            options: CycleOptions::default(),
            postselect_final: false,
        }
    }
}

impl ErasureQubitConfig {
    /// Photon loss only, ideal checks, with the given loss rate.
    pub fn loss_only(kappa: f64, tau: f64, t_cycle: f64, dim: usize) -> Self {
        let params = SystemParams {
            t1_c: 1.0 / kappa,
            t2r_c: 2.0 / kappa,
            ..SystemParams::default()
        };
        Self {
            params,
            tau,
            t_cycle,
            dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.detection_errors.validate()?;
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(invalid("tau", format!("must be > 0, got {}", self.tau)));
        }
        if !(self.t_cycle >= self.tau && self.t_cycle.is_finite()) {
            return Err(invalid(
                "t_cycle",
                format!("must be >= tau = {}, got {}", self.tau, self.t_cycle),
            ));
        }
        if self.dim < 3 {
            return Err(invalid("dim", format!("must be >= 3, got {}", self.dim)));
        }
        if self.options.no_jump_only && (self.options.thermal || self.options.dephasing) {
            return Err(invalid(
                "no_jump_only",
                "cannot be combined with thermal or dephasing idling",
            ));
        }
        Ok(())
    }

    /// Check duration `T_cycle - tau`.
    pub fn t_check(&self) -> f64 {
        self.t_cycle - self.tau
    }

    pub fn kappa(&self) -> f64 {
        self.params.kappa_c()
    }
}
