use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Transition rates (1/s) of the Fock qutrit `{|0>, |1>, |2>}`; `gamma_ij`
/// moves population from `|i>` to `|j>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QutritRates {
    pub gamma_21: f64,
    pub gamma_12: f64,
    pub gamma_10: f64,
    pub gamma_01: f64,
}

impl QutritRates {
    /// Rates fitted on the measured device.
    pub fn measured() -> Self {
        Self {
            gamma_21: 1.0 / 244.0e-6,
            gamma_12: 1.0 / 33.6e-3,
            gamma_10: 1.0 / 466e-6,
            gamma_01: 1.0 / 64.7e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("gamma_21", self.gamma_21),
            ("gamma_12", self.gamma_12),
            ("gamma_10", self.gamma_10),
            ("gamma_01", self.gamma_01),
        ];
        for (name, g) in all {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(invalid(name, format!("rate must be >= 0, got {g}")));
            }
        }
        Ok(())
    }

    /// Generator `R` of `dP/dt = R P` for `P = (P0, P1, P2)`.
    pub fn rate_matrix(&self) -> DMatrix<f64> {
        let Self {
            gamma_21: g21,
            gamma_12: g12,
            gamma_10: g10,
            gamma_01: g01,
        } = *self;
        DMatrix::from_row_slice(
            3,
            3,
            &[
                -g01, g10, 0.0, //
                g01, -g10 - g12, g21, //
                0.0, g12, -g21,
            ],
        )
    }
}

/// Exact solution `P(t) = exp(R t) P(0)`.
pub fn qutrit_rate_evolution(rates: &QutritRates, p0: [f64; 3], t: f64) -> Result<[f64; 3]> {
    rates.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("t", format!("must be >= 0, got {t}")));
    }
    let total: f64 = p0.iter().sum();
    if p0.iter().any(|p| !(0.0..=1.0).contains(p)) || (total - 1.0).abs() > 1e-12 {
        return Err(invalid("p0", "initial populations must be a probability vector"));
    }
    let prop = (rates.rate_matrix() * t).exp();
    let p = prop * DVector::from_column_slice(&p0);
    Ok([p[0].clamp(0.0, 1.0), p[1].clamp(0.0, 1.0), p[2].clamp(0.0, 1.0)])
}

/// Stationary populations: the normalized null vector of the rate matrix.
pub fn steady_state(rates: &QutritRates) -> Result<[f64; 3]> {
    rates.validate()?;
    let svd = rates.rate_matrix().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD failed".into()))?;
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Numerical("empty spectrum".into()))?;
    let v = v_t.row(k);
    let sum: f64 = v.iter().sum();
    if sum.abs() < 1e-300 {
        return Err(Error::Numerical("null vector has zero weight".into()));
    }
    Ok([v[0] / sum, v[1] / sum, v[2] / sum])
}

/// `gamma_21 / gamma_01`; `f64::MAX` when `gamma_01 = 0` and `gamma_21 > 0`.
pub fn erasure_bias_ratio(rates: &QutritRates) -> Result<f64> {
    rates.validate()?;
    if rates.gamma_01 == 0.0 {
        if rates.gamma_21 == 0.0 {
            return Err(invalid("gamma_01", "both erasure rates are zero"));
        }
        return Ok(f64::MAX);
    }
    Ok(rates.gamma_21 / rates.gamma_01)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn pure_decay_from_two() {
        let r = QutritRates {
            gamma_21: 1e4,
            gamma_12: 0.0,
            gamma_10: 5e3,
            gamma_01: 0.0,
        };
        let p = qutrit_rate_evolution(&r, [0.0, 0.0, 1.0], 1e-4).unwrap();
        assert_abs_diff_eq!(p[2], (-1.0f64).exp(), epsilon = 1e-13);
    }

    #[test]
    fn steady_state_satisfies_detailed_balance() {
        let r = QutritRates::measured();
        let s = steady_state(&r).unwrap();
        // Chain 0 <-> 1 <-> 2 is a tree, so detailed balance holds.
        let p1_over_p0 = r.gamma_01 / r.gamma_10;
        let p2_over_p1 = r.gamma_12 / r.gamma_21;
        let p0 = 1.0 / (1.0 + p1_over_p0 + p1_over_p0 * p2_over_p1);
        assert_abs_diff_eq!(s[0], p0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], p0 * p1_over_p0, epsilon = 1e-12);
        let late = qutrit_rate_evolution(&r, [0.0, 0.0, 1.0], 2.0).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(late[i], s[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn bias_ratio_cases() {
        let r = QutritRates::measured();
        assert!((erasure_bias_ratio(&r).unwrap() - 265.2).abs() < 0.1);
        let eq = QutritRates {
            gamma_21: 3.0,
            gamma_12: 0.0,
            gamma_10: 0.0,
            gamma_01: 3.0,
        };
        assert_eq!(erasure_bias_ratio(&eq).unwrap(), 1.0);
        let sat = QutritRates { gamma_01: 0.0, ..eq };
        assert_eq!(erasure_bias_ratio(&sat).unwrap(), f64::MAX);
    }

    proptest! {
        #[test]
        fn populations_conserved(
            g21 in 0.0..1e5f64, g12 in 0.0..1e3f64, g10 in 0.0..1e5f64, g01 in 0.0..1e3f64,
            t in 0.0..5e-3f64, a in 0.0..1.0f64, b in 0.0..1.0f64,
        ) {
            let r = QutritRates { gamma_21: g21, gamma_12: g12, gamma_10: g10, gamma_01: g01 };
            let p0 = [a * (1.0 - b), (1.0 - a) * (1.0 - b), 0.0];
            let p0 = [p0[0], p0[1], 1.0 - p0[0] - p0[1]];
            let p = qutrit_rate_evolution(&r, p0, t).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }
}
