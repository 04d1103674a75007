//! Nonlinear least-squares fitting and bootstrap uncertainties.

mod bootstrap;
mod lm;
mod models;

pub use bootstrap::{bootstrap, bootstrap_multi, ConfidenceInterval, DEFAULT_RESAMPLES};
pub use lm::{levenberg_marquardt, numerical_jacobian, LeastSquares, LmOptions, LmOutcome};
pub use models::{
    effective_jacobian, exponential_jacobian, fit_effective_relaxation, fit_exponential,
    fit_power_decay, fit_rate_equations, FixedRates,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    /// Asymptotic standard error from the Jacobian at the optimum.
    pub stderr: Option<f64>,
    /// Bootstrap percentile interval `[lower, upper]`, when computed.
    pub ci: Option<[f64; 2]>,
}

impl FitParam {
    pub(crate) fn point(name: &str, value: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            stderr: None,
            ci: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub params: Vec<FitParam>,
    /// Quantities held fixed during the fit.
    pub fixed: BTreeMap<String, f64>,
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Diagnostics such as degenerate or non-identifiable parameters.
    pub flags: Vec<String>,
    /// Bootstrap seed, when intervals were attached.
    pub seed: Option<u64>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.param(name).map(|p| p.value)
    }

    /// Attaches intervals by parameter name.
    pub fn attach_intervals(&mut self, names: &[&str], cis: &[ConfidenceInterval]) {
        for (name, ci) in names.iter().zip(cis) {
            if let Some(p) = self.params.iter_mut().find(|p| p.name == *name) {
                p.ci = Some([ci.lower.min(p.value), ci.upper.max(p.value)]);
            }
            self.seed = Some(ci.seed);
        }
    }
}
