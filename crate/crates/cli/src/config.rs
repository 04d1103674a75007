use std::path::PathBuf;

use fock_erasure::channels::SystemParams;
use fock_erasure::erasure::{CycleOptions, ErasureQubitConfig};
use fock_erasure::measure::DetectionErrorModel;
use fock_erasure::tomography::MleCost;
use serde::{Deserialize, Serialize};

use crate::units::{Frequency, Time};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Relax,
    Ramsey,
    Cpmg,
    Rb,
    Classify,
    TomoState,
    TomoProcess,
    DephasingScan,
    RateEq,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Relax => "relax",
            Experiment::Ramsey => "ramsey",
            Experiment::Cpmg => "cpmg",
            Experiment::Rb => "rb",
            Experiment::Classify => "classify",
            Experiment::TomoState => "tomo_state",
            Experiment::TomoProcess => "tomo_process",
            Experiment::DephasingScan => "dephasing_scan",
            Experiment::RateEq => "rate_eq",
        }
    }
}

/// Top-level experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    /// Stem of the output files; defaults to the experiment name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub system: SystemOverrides,
    #[serde(default)]
    pub cycle: CycleSection,
    #[serde(default)]
    pub detection: DetectionOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idling: Option<IdlingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rb: Option<RbSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify: Option<ClassifySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tomo_state: Option<TomoStateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tomo_process: Option<TomoProcessSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dephasing_scan: Option<DephasingScanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_eq: Option<RateEqSection>,
}

/// Device parameters that differ from the measured defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t1_c: Option<Time>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t2r_c: Option<Time>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tphi_c: Option<Time>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t1_q: Option<Time>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t2r_q: Option<Time>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tphi_q: Option<Time>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nth_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nth_q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_c: Option<Frequency>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi_qc: Option<Frequency>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_r: Option<Frequency>,
}

impl SystemOverrides {
    pub fn apply(&self) -> SystemParams {
        let mut p = SystemParams::default();
        let set_t = |slot: &mut f64, v: Option<Time>| {
            if let Some(t) = v {
                *slot = t.0;
            }
        };
        set_t(&mut p.t1_c, self.t1_c);
        set_t(&mut p.t2r_c, self.t2r_c);
        set_t(&mut p.tphi_c, self.tphi_c);
        set_t(&mut p.t1_q, self.t1_q);
        set_t(&mut p.t2r_q, self.t2r_q);
        set_t(&mut p.tphi_q, self.tphi_q);
        if let Some(n) = self.nth_c {
            p.nth_c = n;
        }
        if let Some(n) = self.nth_q {
            p.nth_q = n;
        }
        if let Some(f) = self.k_c {
            p.k_c = f.0;
        }
        if let Some(f) = self.chi_qc {
            p.chi_qc = f.0;
        }
        if let Some(f) = self.kappa_r {
            p.kappa_r = f.0;
        }
        p
    }
}

/// Check-cycle timing, truncation and which physical effects to include.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CycleSection {
    pub tau: Time,
    pub t_cycle: Time,
    pub dim: usize,
    pub thermal: bool,
    /// Cavity pure dephasing during idling. Unset means on, except for
    /// `cpmg`, where the echo pulses refocus the slow dephasing noise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dephasing: Option<bool>,
    pub detection_errors: bool,
    pub idle_during_check: bool,
    pub postselect_final: bool,
}

impl Default for CycleSection {
    fn default() -> Self {
        Self {
            tau: Time(11.9e-6),
            t_cycle: Time(13.0e-6),
            dim: 4,
            thermal: true,
            dephasing: None,
            detection_errors: true,
            idle_during_check: true,
            postselect_final: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_false_positive: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_false_negative: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_induced_dephasing: Option<f64>,
    /// Symmetric ancilla misassignment probability.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub readout_error: Option<f64>,
}

/// Settings shared by `relax`, `ramsey` and `cpmg`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdlingSection {
    pub m_max: u64,
    /// Monte Carlo shots; the exact density-matrix iteration is used when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbSection {
    pub lengths: Vec<usize>,
    pub shots_per_length: usize,
    #[serde(default)]
    pub p_erasure_per_gate: f64,
    /// Depolarizing error per physical pulse.
    #[serde(default)]
    pub residual_per_gate: f64,
    #[serde(default = "default_gate_duration")]
    pub gate_duration: Time,
    /// Offset `B` of the `p0L` fit, held fixed unless `free_offset`.
    #[serde(default = "default_rb_offset")]
    pub offset: f64,
    #[serde(default)]
    pub free_offset: bool,
    /// Bootstrap resamples for the RB confidence intervals (0 = none).
    #[serde(default)]
    pub bootstrap: usize,
}

fn default_gate_duration() -> Time {
    Time(1.2e-6)
}

fn default_rb_offset() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySection {
    pub shots_per_state: usize,
    #[serde(default = "default_prepared")]
    pub prepared: Vec<usize>,
}

fn default_prepared() -> Vec<usize> {
    vec![0, 1, 2, 3]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicalState {
    Zero,
    One,
    PlusX,
    MinusX,
    PlusY,
    MinusY,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomoStateSection {
    pub state: LogicalState,
    pub shots: u64,
    /// 5 (logical subspace) or 8 (qutrit) displacement points.
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub cost: MleCost,
    /// Idle check cycles applied before the tomography.
    #[serde(default)]
    pub idle_cycles: u64,
}

fn default_points() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomoProcessSection {
    /// Photon loss acts for this long after the ideal `X_L/2`.
    #[serde(default = "default_gate_duration")]
    pub gate_duration: Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DephasingScanSection {
    pub tau_tot: Time,
    pub m_list: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateEqSection {
    pub t_max: Time,
    pub n_points: usize,
    /// Standard deviation of Gaussian noise added to each population.
    #[serde(default)]
    pub noise: f64,
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{field}`: {reason}"))
}

fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    section
        .as_ref()
        .ok_or_else(|| invalid(name, "section is required for this experiment"))
}

fn probability(field: &str, p: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(field, format!("must be a probability in [0, 1], got {p}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn stem(&self) -> &str {
        self.name.as_deref().unwrap_or(self.experiment.name())
    }

    pub fn detection_model(&self) -> DetectionErrorModel {
        let mut m = DetectionErrorModel::default();
        let d = &self.detection;
        if let Some(p) = d.p_false_positive {
            m.p_false_positive = p;
        }
        if let Some(p) = d.p_false_negative {
            m.p_false_negative = p;
        }
        if let Some(p) = d.p_induced_dephasing {
            m.p_induced_dephasing = p;
        }
        if let Some(e) = d.readout_error {
            m = m.with_symmetric_readout(e);
        }
        m
    }

    pub fn qubit_config(&self) -> ErasureQubitConfig {
        let c = &self.cycle;
        ErasureQubitConfig {
            params: self.system.apply(),
            tau: c.tau.0,
            t_cycle: c.t_cycle.0,
            detection_errors: self.detection_model(),
            dim: c.dim,
            options: CycleOptions {
                thermal: c.thermal,
                dephasing: c.dephasing.unwrap_or(self.experiment != Experiment::Cpmg),
                detection_errors: c.detection_errors,
                idle_during_check: c.idle_during_check,
                no_jump_only: false,
            },
            postselect_final: c.postselect_final,
        }
    }

    /// Checks everything the chosen experiment needs before it runs.
    pub fn validate(&self) -> Result<(), CliError> {
        self.system.apply().validate().map_err(|e| prefixed("system", e))?;
        self.detection_model()
            .validate()
            .map_err(|e| prefixed("detection", e))?;
        self.qubit_config().validate().map_err(|e| prefixed("cycle", e))?;
        match self.experiment {
            Experiment::Relax | Experiment::Ramsey | Experiment::Cpmg => {
                let s = require(&self.idling, "idling")?;
                if s.m_max == 0 {
                    return Err(invalid("idling.m_max", "must be > 0"));
                }
                if s.shots == Some(0) {
                    return Err(invalid("idling.shots", "must be > 0"));
                }
            }
            Experiment::Rb => {
                let s = require(&self.rb, "rb")?;
                if s.lengths.len() < 3 {
                    return Err(invalid("rb.lengths", "need at least three lengths"));
                }
                if s.shots_per_length == 0 {
                    return Err(invalid("rb.shots_per_length", "must be > 0"));
                }
                probability("rb.p_erasure_per_gate", s.p_erasure_per_gate)?;
                if !(0.0..=0.5).contains(&s.residual_per_gate) {
                    return Err(invalid("rb.residual_per_gate", "must lie in [0, 0.5]"));
                }
                if !(s.gate_duration.0 >= 0.0) {
                    return Err(invalid("rb.gate_duration", "must be >= 0"));
                }
                if self.cycle.dim < 3 {
                    return Err(invalid("cycle.dim", "RB needs at least three levels"));
                }
            }
            Experiment::Classify => {
                let s = require(&self.classify, "classify")?;
                if s.shots_per_state == 0 {
                    return Err(invalid("classify.shots_per_state", "must be > 0"));
                }
                if s.prepared.is_empty() || s.prepared.iter().any(|&n| n > 3) {
                    return Err(invalid("classify.prepared", "levels must be in 0..=3"));
                }
            }
            Experiment::TomoState => {
                let s = require(&self.tomo_state, "tomo_state")?;
                if s.shots == 0 {
                    return Err(invalid("tomo_state.shots", "must be > 0"));
                }
                if s.points != 5 && s.points != 8 {
                    return Err(invalid("tomo_state.points", "must be 5 or 8"));
                }
            }
            Experiment::TomoProcess => {
                let s = require(&self.tomo_process, "tomo_process")?;
                if !(s.gate_duration.0 >= 0.0) {
                    return Err(invalid("tomo_process.gate_duration", "must be >= 0"));
                }
            }
            Experiment::DephasingScan => {
                let s = require(&self.dephasing_scan, "dephasing_scan")?;
                if !(s.tau_tot.0 > 0.0) {
                    return Err(invalid("dephasing_scan.tau_tot", "must be > 0"));
                }
                if s.m_list.is_empty() {
                    return Err(invalid("dephasing_scan.m_list", "must not be empty"));
                }
            }
            Experiment::RateEq => {
                let s = require(&self.rate_eq, "rate_eq")?;
                if !(s.t_max.0 > 0.0) {
                    return Err(invalid("rate_eq.t_max", "must be > 0"));
                }
                if s.n_points < 3 {
                    return Err(invalid("rate_eq.n_points", "need at least three points"));
                }
                if !(s.noise >= 0.0 && s.noise.is_finite()) {
                    return Err(invalid("rate_eq.noise", "must be >= 0"));
                }
            }
        }
        Ok(())
    }
}

fn prefixed(section: &str, e: fock_erasure::Error) -> CliError {
    match e {
        fock_erasure::Error::InvalidParameter { name, reason } => invalid(&format!("{section}.{name}"), reason),
        other => CliError::Config(format!("{section}: {other}")),
    }
}

/// Annotated example configuration covering every key.
pub const SCHEMA: &str = r#"# Experiment configuration (TOML). Quantities with units are strings:
# times take ns, us, ms or s; frequencies take Hz, kHz, MHz or GHz.
# Unknown keys are rejected.

experiment = "relax"   # relax | ramsey | cpmg | rb | classify | tomo_state
                       # | tomo_process | dephasing_scan | rate_eq
seed = 1               # RNG seed (default 0)
name = "relax"         # output file stem (default: experiment name)
output_dir = "results" # default: --out, then $FOCK_ERASURE_OUT, then "."

[system]               # optional; unset keys keep the measured device values
t1_c = "466 us"
t2r_c = "735 us"
tphi_c = "3073 us"
t1_q = "141 us"
t2r_q = "117 us"
tphi_q = "200 us"
nth_c = 0.0072
nth_q = 0.0534
k_c = "3.98 kHz"
chi_qc = "1.69 MHz"
kappa_r = "1.542 MHz"

[cycle]
tau = "11.9 us"        # idle interval between checks
t_cycle = "13 us"      # idle plus check
dim = 4                # Fock truncation
thermal = true
# dephasing = true     # default: on, off for cpmg
detection_errors = true
idle_during_check = true
postselect_final = false

[detection]            # optional overrides
p_false_positive = 0.0022
p_false_negative = 0.0069
p_induced_dephasing = 0.0026
readout_error = 0.0098

[idling]               # relax, ramsey, cpmg
m_max = 300
# shots = 20000        # Monte Carlo instead of exact iteration

[rb]
lengths = [0, 5, 10, 20, 40, 60, 80, 100]
shots_per_length = 2000
p_erasure_per_gate = 0.0
residual_per_gate = 0.0
gate_duration = "1.2 us"
offset = 0.5           # p0L offset B
free_offset = false    # fit B instead of holding it
bootstrap = 0

[classify]
shots_per_state = 50000
prepared = [0, 1, 2, 3]

[tomo_state]
state = "plus_x"       # zero | one | plus_x | minus_x | plus_y | minus_y
shots = 2000
points = 5             # 5 or 8
cost = "least_squares" # or "shot_weighted"
idle_cycles = 0

[tomo_process]
gate_duration = "1.2 us"

[dephasing_scan]
tau_tot = "1 ms"
m_list = [0, 1, 2, 5, 10, 20, 40, 70]

[rate_eq]
t_max = "3 ms"
n_points = 60
noise = 0.0
"#;

