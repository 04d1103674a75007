use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::erasure::{intrinsic_relaxation_rate, QutritRates};
use crate::error::{invalid, Error, Result};

use super::lm::{levenberg_marquardt, LeastSquares, LmOptions, LmOutcome};
use super::{FitParam, FitResult};

fn check_xy(t: &[f64], y: &[f64], min: usize) -> Result<()> {
    if t.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: t.len(),
            found: y.len(),
        });
    }
    if t.len() < min {
        return Err(Error::InsufficientData(format!(
            "{} points, need at least {min}",
            t.len()
        )));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(invalid("data", "contains non-finite values"));
    }
    Ok(())
}

fn span(t: &[f64]) -> f64 {
    let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// Least-squares line through `(x, y)`; returns `(intercept, slope)`.
fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

fn outcome_params(names: &[&str], outcome: &LmOutcome) -> Vec<FitParam> {
    let cov = outcome.covariance();
    names
        .iter()
        .enumerate()
        .map(|(i, name)| FitParam {
            name: (*name).to_string(),
            value: outcome.params[i],
            stderr: cov.as_ref().map(|c| c[(i, i)].max(0.0).sqrt()),
            ci: None,
        })
        .collect()
}

/// `A e^{-gamma t} + B`, with `B` optionally fixed.
struct Exponential<'a> {
    t: &'a [f64],
    y: &'a [f64],
    offset: Option<f64>,
    scales: Vec<f64>,
}

impl Exponential<'_> {
    fn split(&self, p: &[f64]) -> (f64, f64, f64) {
        (p[0], p[1], self.offset.unwrap_or_else(|| p[2]))
    }
}

impl LeastSquares for Exponential<'_> {
    fn n_params(&self) -> usize {
        if self.offset.is_some() {
            2
        } else {
            3
        }
    }

    fn residuals(&self, p: &[f64]) -> Option<DVector<f64>> {
        let (a, g, b) = self.split(p);
        Some(DVector::from_iterator(
            self.t.len(),
            self.t.iter().zip(self.y).map(|(t, y)| a * (-g * t).exp() + b - y),
        ))
    }

    fn scales(&self) -> Vec<f64> {
        self.scales.clone()
    }

    fn jacobian(&self, p: &[f64]) -> Option<DMatrix<f64>> {
        Some(exponential_jacobian(self.t, p, self.offset.is_none()))
    }
}

/// Analytic Jacobian of `A e^{-gamma t} + B` with respect to
/// `(A, gamma[, B])`.
pub fn exponential_jacobian(t: &[f64], params: &[f64], free_offset: bool) -> DMatrix<f64> {
    let (a, g) = (params[0], params[1]);
    let cols = if free_offset { 3 } else { 2 };
    DMatrix::from_fn(t.len(), cols, |i, j| {
        let e = (-g * t[i]).exp();
        match j {
            0 => e,
            1 => -a * t[i] * e,
            _ => 1.0,
        }
    })
}

/// Log-linear guess for `(A, gamma)` at a given offset, with its model SSE.
fn loglinear_guess(t: &[f64], y: &[f64], b: f64) -> Option<(f64, f64, f64)> {
    let sign = if y.iter().map(|v| v - b).sum::<f64>() >= 0.0 { 1.0 } else { -1.0 };
    let (x, l): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(y)
        .filter(|(_, v)| sign * (**v - b) > 0.0)
        .map(|(t, v)| (*t, (sign * (v - b)).ln()))
        .unzip();
    let (c, slope) = linear_fit(&x, &l)?;
    let a = sign * c.exp();
    let g = -slope;
    let sse = t
        .iter()
        .zip(y)
        .map(|(t, v)| (a * (-g * t).exp() + b - v).powi(2))
        .sum();
    Some((a, g, sse))
}

/// Fits `y = A e^{-gamma t} + B` by Levenberg-Marquardt from a log-linear
/// starting point. Constant data give `gamma = 0` and `A = mean - B`; unless
/// a pinned offset makes that an exact fit, the result carries the `no_decay`
/// flag instead of an error.
pub fn fit_exponential(t: &[f64], y: &[f64], fix_offset: Option<f64>) -> Result<FitResult> {
    let n_free = if fix_offset.is_some() { 2 } else { 3 };
    check_xy(t, y, n_free)?;
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let range = ymax - ymin;
    let tspan = span(t);
    let mut fixed = BTreeMap::new();
    if let Some(b) = fix_offset {
        fixed.insert("B".to_string(), b);
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    if range <= 1e-12 * ymax.abs().max(1.0) || tspan == 0.0 {
        let b = fix_offset.unwrap_or(mean);
        let mut params = vec![
            FitParam::point("A", mean - b),
            FitParam::point("gamma", 0.0),
        ];
        if fix_offset.is_none() {
            params.push(FitParam::point("B", b));
        }
        // With a pinned offset away from the data, gamma = 0 is the exact fit.
        let identified = fix_offset.is_some_and(|b| (mean - b).abs() > 1e-12 * mean.abs().max(1.0)) && tspan > 0.0;
        return Ok(FitResult {
            model: "exponential".into(),
            params,
            fixed,
            residual_norm: y.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt(),
            converged: identified,
            iterations: 0,
            flags: if identified {
                Vec::new()
            } else {
                vec!["no_decay: data are constant, gamma is not identifiable".into()]
            },
            seed: None,
        });
    }

    let guess = match fix_offset {
        Some(b) => loglinear_guess(t, y, b).map(|(a, g, _)| (a, g, b)),
        None => {
            let descending = {
                let first = t.iter().zip(y).min_by(|a, b| a.0.total_cmp(b.0)).map(|p| *p.1);
                let last = t.iter().zip(y).max_by(|a, b| a.0.total_cmp(b.0)).map(|p| *p.1);
                first >= last
            };
            let edge = if descending { ymin } else { ymax };
            let dir = if descending { -1.0 } else { 1.0 };
            [1e-3, 1e-2, 3e-2, 0.1, 0.3, 1.0, 3.0, 10.0]
                .iter()
                .filter_map(|f| {
                    let b = edge + dir * f * range;
                    loglinear_guess(t, y, b).map(|(a, g, sse)| (a, g, b, sse))
                })
                .min_by(|a, b| a.3.total_cmp(&b.3))
                .map(|(a, g, b, _)| (a, g, b))
        }
    };
    let (a0, g0, b0) = guess.unwrap_or((range, 1.0 / tspan, mean));
    let scale_y = ymax.abs().max(ymin.abs()).max(range);
    let mut scales = vec![scale_y, 1.0 / tspan];
    let mut p0 = vec![a0, g0];
    if fix_offset.is_none() {
        scales.push(scale_y);
        p0.push(b0);
    }
    let problem = Exponential {
        t,
        y,
        offset: fix_offset,
        scales,
    };
    let outcome = levenberg_marquardt(&problem, &p0, &LmOptions::default())?;
    let names: &[&str] = if fix_offset.is_some() {
        &["A", "gamma"]
    } else {
        &["A", "gamma", "B"]
    };
    let mut flags = Vec::new();
    if outcome.is_degenerate() {
        flags.push("non_identifiable: Jacobian is rank deficient at the optimum".into());
    }
    Ok(FitResult {
        model: "exponential".into(),
        params: outcome_params(names, &outcome),
        fixed,
        residual_norm: outcome.cost.sqrt(),
        converged: outcome.converged,
        iterations: outcome.iterations,
        flags,
        seed: None,
    })
}

/// Fits `y = A p^M + B` on integer abscissae through [`fit_exponential`] with
/// `p = e^{-gamma}`; reports `A`, `p` and `B`.
pub fn fit_power_decay(m: &[f64], y: &[f64], fix_offset: Option<f64>) -> Result<FitResult> {
    let mut fit = fit_exponential(m, y, fix_offset)?;
    fit.model = "power_decay".into();
    for param in &mut fit.params {
        if param.name == "gamma" {
            let p = (-param.value).exp();
            *param = FitParam {
                name: "p".into(),
                value: p,
                stderr: param.stderr.map(|s| p * s),
                ci: None,
            };
        }
    }
    Ok(fit)
}

/// Closed-form loss-only `P_1L` continued to non-integer cycle counts.
fn p1l_continuous(kappa: f64, tau: f64, t_cycle: f64, t: f64) -> f64 {
    let x = kappa * tau;
    (x.exp() + 1.0) / (x.exp_m1() * (2.0 * x * t / t_cycle).exp() + 2.0)
}

struct Effective<'a> {
    t: &'a [f64],
    y: &'a [f64],
    base: Vec<f64>,
    scales: Vec<f64>,
}

impl LeastSquares for Effective<'_> {
    fn n_params(&self) -> usize {
        3
    }

    fn residuals(&self, p: &[f64]) -> Option<DVector<f64>> {
        let (a, g, b) = (p[0], p[1], p[2]);
        Some(DVector::from_iterator(
            self.t.len(),
            self.t
                .iter()
                .zip(self.y)
                .zip(&self.base)
                .map(|((t, y), f)| a * f * (-g * t).exp() + b - y),
        ))
    }

    fn scales(&self) -> Vec<f64> {
        self.scales.clone()
    }

    fn jacobian(&self, p: &[f64]) -> Option<DMatrix<f64>> {
        Some(effective_jacobian(self.t, &self.base, p))
    }
}

/// Analytic Jacobian of `A f(t) e^{-gamma t} + B` with respect to
/// `(A, gamma, B)`, given the tabulated closed-form curve `f`.
pub fn effective_jacobian(t: &[f64], base: &[f64], params: &[f64]) -> DMatrix<f64> {
    let (a, g) = (params[0], params[1]);
    DMatrix::from_fn(t.len(), 3, |i, j| {
        let e = base[i] * (-g * t[i]).exp();
        match j {
            0 => e,
            1 => -a * t[i] * e,
            _ => 1.0,
        }
    })
}

/// Fits `P(t) = A P_loss(t) e^{-gamma_res t} + B`, where `P_loss` is the
/// closed-form loss-only relaxation law for the given `kappa`, `tau` and
/// cycle time. Also reports `gamma_total = gamma_int + gamma_res`.
pub fn fit_effective_relaxation(
    t: &[f64],
    p1l: &[f64],
    kappa: f64,
    tau: f64,
    t_cycle: f64,
) -> Result<FitResult> {
    check_xy(t, p1l, 4)?;
    if !(kappa >= 0.0 && tau >= 0.0 && t_cycle > 0.0) {
        return Err(invalid("kappa/tau/t_cycle", "must be non-negative with t_cycle > 0"));
    }
    let base: Vec<f64> = t.iter().map(|&t| p1l_continuous(kappa, tau, t_cycle, t)).collect();
    let tspan = span(t);
    if tspan == 0.0 {
        return Err(Error::InsufficientData("all times are equal".into()));
    }
    let ratio: Vec<(f64, f64)> = t
        .iter()
        .zip(p1l)
        .zip(&base)
        .filter(|((_, y), f)| **y > 0.0 && **f > 0.0)
        .map(|((t, y), f)| (*t, (y / f).ln()))
        .collect();
    let (x, l): (Vec<f64>, Vec<f64>) = ratio.into_iter().unzip();
    let (c, slope) = linear_fit(&x, &l).unwrap_or((0.0, 0.0));
    let p0 = [c.exp(), (-slope).max(0.0), 0.0];
    let problem = Effective {
        t,
        y: p1l,
        base,
        scales: vec![1.0, 1.0 / tspan, 1.0],
    };
    let outcome = levenberg_marquardt(&problem, &p0, &LmOptions::default())?;
    let mut params = outcome_params(&["A", "gamma_res", "B"], &outcome);
    let gamma_int = intrinsic_relaxation_rate(kappa, tau, t_cycle);
    params.push(FitParam {
        name: "gamma_total".into(),
        value: gamma_int + outcome.params[1],
        stderr: params[1].stderr,
        ci: None,
    });
    let mut fixed = BTreeMap::new();
    fixed.insert("kappa".to_string(), kappa);
    fixed.insert("tau".to_string(), tau);
    fixed.insert("t_cycle".to_string(), t_cycle);
    fixed.insert("gamma_int".to_string(), gamma_int);
    let mut flags = Vec::new();
    if outcome.is_degenerate() {
        flags.push("non_identifiable: Jacobian is rank deficient at the optimum".into());
    }
    Ok(FitResult {
        model: "effective_relaxation".into(),
        params,
        fixed,
        residual_norm: outcome.cost.sqrt(),
        converged: outcome.converged,
        iterations: outcome.iterations,
        flags,
        seed: None,
    })
}

/// Rates held fixed in [`fit_rate_equations`], plus the initial populations
/// `(P0, P1, P2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedRates {
    pub gamma_10: f64,
    pub gamma_01: f64,
    pub initial: [f64; 3],
}

impl Default for FixedRates {
    fn default() -> Self {
        let m = QutritRates::measured();
        Self {
            gamma_10: m.gamma_10,
            gamma_01: m.gamma_01,
            initial: [0.0, 0.0, 1.0],
        }
    }
}

/// Starting point for `gamma_21` and `gamma_12`: order-of-magnitude priors
/// of 1/(200 us) and 1/(20 ms).
const RATE_PRIORS: [f64; 2] = [1.0 / 200e-6, 1.0 / 20e-3];

struct RateEquations<'a> {
    t: &'a [f64],
    populations: &'a [[f64; 3]],
    fixed: FixedRates,
}

impl LeastSquares for RateEquations<'_> {
    fn n_params(&self) -> usize {
        2
    }

    /// Parameters are `ln gamma_21` and `ln gamma_12`.
    fn residuals(&self, p: &[f64]) -> Option<DVector<f64>> {
        let rates = QutritRates {
            gamma_21: p[0].exp(),
            gamma_12: p[1].exp(),
            gamma_10: self.fixed.gamma_10,
            gamma_01: self.fixed.gamma_01,
        };
        if !rates.gamma_21.is_finite() || !rates.gamma_12.is_finite() {
            return None;
        }
        let r = rates.rate_matrix();
        let p0 = DVector::from_column_slice(&self.fixed.initial);
        let mut out = DVector::zeros(3 * self.t.len());
        for (i, (&t, data)) in self.t.iter().zip(self.populations).enumerate() {
            let p = (&r * t).exp() * &p0;
            for k in 0..3 {
                out[3 * i + k] = p[k] - data[k];
            }
        }
        Some(out)
    }

    fn scales(&self) -> Vec<f64> {
        vec![1.0, 1.0]
    }
}

/// Global fit of `gamma_21` and `gamma_12` to all three population curves,
/// with `gamma_10`, `gamma_01` and the initial populations held fixed. The
/// model is the exact 3x3 matrix exponential; rates are fitted in log space.
pub fn fit_rate_equations(t: &[f64], populations: &[[f64; 3]], fixed: FixedRates) -> Result<FitResult> {
    if t.len() != populations.len() {
        return Err(Error::DimensionMismatch {
            expected: t.len(),
            found: populations.len(),
        });
    }
    if t.len() < 2 {
        return Err(Error::InsufficientData("need at least two time points".into()));
    }
    if t.iter().any(|v| !(v.is_finite() && *v >= 0.0))
        || populations.iter().flatten().any(|v| !v.is_finite())
    {
        return Err(invalid("data", "times must be >= 0 and populations finite"));
    }
    if !(fixed.gamma_10 >= 0.0 && fixed.gamma_01 >= 0.0) {
        return Err(invalid("fixed", "rates must be >= 0"));
    }
    let problem = RateEquations {
        t,
        populations,
        fixed,
    };
    let p0 = [RATE_PRIORS[0].ln(), RATE_PRIORS[1].ln()];
    let outcome = levenberg_marquardt(&problem, &p0, &LmOptions::default())?;
    let cov = outcome.covariance();
    let params = ["gamma_21", "gamma_12"]
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let value = outcome.params[i].exp();
            FitParam {
                name: (*name).to_string(),
                value,
                stderr: cov.as_ref().map(|c| value * c[(i, i)].max(0.0).sqrt()),
                ci: None,
            }
        })
        .collect();
    let mut fixed_map = BTreeMap::new();
    fixed_map.insert("gamma_10".to_string(), fixed.gamma_10);
    fixed_map.insert("gamma_01".to_string(), fixed.gamma_01);
    for (k, v) in fixed.initial.iter().enumerate() {
        fixed_map.insert(format!("initial_p{k}"), *v);
    }
    let mut flags = Vec::new();
    if outcome.is_degenerate() {
        flags.push("non_identifiable: the data do not constrain both rates".into());
    }
    Ok(FitResult {
        model: "rate_equations".into(),
        params,
        fixed: fixed_map,
        residual_norm: outcome.cost.sqrt(),
        converged: outcome.converged,
        iterations: outcome.iterations,
        flags,
        seed: None,
    })
}
