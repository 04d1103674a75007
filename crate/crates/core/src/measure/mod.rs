//! Parity checks, cascaded Fock-state classification, photon-number-resolved
//! readout and assignment statistics.

mod classify;
mod metrics;
mod parity;
mod record;
mod scan;

pub use classify::{
    cascaded_label_distribution, mod2_then_mod4_classify, photon_number_resolved_measure,
    pnr_label_distribution, simulate_assignment_experiment,
};
pub use metrics::{assignment_metrics, AssignmentMetrics, Estimate};
pub use parity::{check_instrument, logical_phase_flip, parity_measure};
pub use record::{read_shots_ndjson, write_shots_csv, write_shots_ndjson, FinalLabel, ShotRecord};
pub use scan::{induced_dephasing_scan, DephasingScan};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Flip probability for one Fock level, overriding the parity default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelFlip {
    pub level: usize,
    pub probability: f64,
}

/// Phenomenological error model of the erasure check and ancilla readout.
///
/// A check on an even Fock state reports '1' with `p_false_positive`, on an
/// odd state reports '0' with `p_false_negative`, unless `level_overrides`
/// names the level. Each check multiplies the `|0>,|2>` coherence by
/// `1 - 2 p_induced_dephasing`. `readout_assignment[i][j]` is the probability
/// that an ancilla prepared in `i` (0 = ground) is read as `j`; it dresses the
/// cascaded and photon-number-resolved measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionErrorModel {
    pub p_false_positive: f64,
    pub p_false_negative: f64,
    pub p_induced_dephasing: f64,
    pub readout_assignment: [[f64; 2]; 2],
    pub level_overrides: Vec<LevelFlip>,
}

/// Symmetric ancilla misassignment that yields a 0.97% cascaded logical
/// assignment error, `eps (1 - eps)`.
pub const DEFAULT_READOUT_ERROR: f64 = 0.0098;

impl Default for DetectionErrorModel {
    fn default() -> Self {
        let e = DEFAULT_READOUT_ERROR;
        Self {
            p_false_positive: 0.0022,
            p_false_negative: 0.0069,
            p_induced_dephasing: 0.0026,
            readout_assignment: [[1.0 - e, e], [e, 1.0 - e]],
            level_overrides: Vec::new(),
        }
    }
}

impl DetectionErrorModel {
    pub fn ideal() -> Self {
        Self {
            p_false_positive: 0.0,
            p_false_negative: 0.0,
            p_induced_dephasing: 0.0,
            readout_assignment: [[1.0, 0.0], [0.0, 1.0]],
            level_overrides: Vec::new(),
        }
    }

    /// Ideal checks with a symmetric ancilla readout error `eps`.
    pub fn with_symmetric_readout(mut self, eps: f64) -> Self {
        self.readout_assignment = [[1.0 - eps, eps], [eps, 1.0 - eps]];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p_false_positive", self.p_false_positive),
            ("p_false_negative", self.p_false_negative),
            ("p_induced_dephasing", self.p_induced_dephasing),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(name, format!("probability must be in [0, 1], got {p}")));
            }
        }
        for row in &self.readout_assignment {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (row[0] + row[1] - 1.0).abs() > 1e-12 {
                return Err(invalid(
                    "readout_assignment",
                    format!("rows must be probabilities summing to 1, got {row:?}"),
                ));
            }
        }
        for o in &self.level_overrides {
            if !(0.0..=1.0).contains(&o.probability) {
                return Err(invalid(
                    "level_overrides",
                    format!("probability for level {} must be in [0, 1]", o.level),
                ));
            }
        }
        Ok(())
    }

    /// Probability that a check on Fock level `n` reports the wrong parity.
    pub fn flip_probability(&self, n: usize) -> f64 {
        if let Some(o) = self.level_overrides.iter().rev().find(|o| o.level == n) {
            return o.probability;
        }
        if n.is_multiple_of(2) {
            self.p_false_positive
        } else {
            self.p_false_negative
        }
    }

    /// Probability that a check on Fock level `n` reports '1'.
    pub fn check_reports_one(&self, n: usize) -> f64 {
        let flip = self.flip_probability(n);
        if n.is_multiple_of(2) {
            flip
        } else {
            1.0 - flip
        }
    }

    /// Probability that an ancilla excited with probability `p_excited` is read as '1'.
    pub fn ancilla_reads_one(&self, p_excited: f64) -> f64 {
        (1.0 - p_excited) * self.readout_assignment[0][1] + p_excited * self.readout_assignment[1][1]
    }
}
