use crate::error::{invalid, Result};

/// Postselected `|1_L>` population after `m` loss-only cycles starting from
/// `|2>`: `(e^x + 1) / ((e^x - 1) e^{2 m x} + 2)` with `x = kappa tau`.
pub fn analytic_p1l_cycles(kappa: f64, tau: f64, m: u64) -> Result<f64> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(invalid("kappa", format!("must be >= 0, got {kappa}")));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(invalid("tau", format!("must be >= 0, got {tau}")));
    }
    let x = kappa * tau;
    let growth = (2.0 * m as f64 * x).exp();
    Ok((x.exp() + 1.0) / (x.exp_m1() * growth + 2.0))
}

/// Same law in terms of elapsed time; `t` must be a whole number of cycles
/// `t_cycle` (relative tolerance 1e-9).
pub fn analytic_p1l(kappa: f64, tau: f64, t_cycle: f64, t: f64) -> Result<f64> {
    if !(t_cycle > 0.0) {
        return Err(invalid("t_cycle", format!("must be > 0, got {t_cycle}")));
    }
    if !(t >= 0.0) {
        return Err(invalid("t", format!("must be >= 0, got {t}")));
    }
    let m = (t / t_cycle).round();
    if (t - m * t_cycle).abs() > 1e-9 * t_cycle.max(t) {
        return Err(invalid(
            "t",
            format!("{t} s is not a whole number of {t_cycle} s cycles"),
        ));
    }
    analytic_p1l_cycles(kappa, tau, m as u64)
}

/// Short-time logical relaxation rate `(kappa tau)^2 / T`.
pub fn intrinsic_relaxation_rate(kappa: f64, tau: f64, t_cycle: f64) -> f64 {
    (kappa * tau).powi(2) / t_cycle
}

/// Probability that an erasure happens during a check and is then missed:
/// `gamma_erasure * t_check * p_fn`.
pub fn missed_erasure_probability(gamma_erasure: f64, t_check: f64, p_fn: f64) -> Result<f64> {
    if !(gamma_erasure >= 0.0) {
        return Err(invalid("gamma_erasure", "must be >= 0"));
    }
    if !(t_check >= 0.0) {
        return Err(invalid("t_check", "must be >= 0"));
    }
    if !(0.0..=1.0).contains(&p_fn) {
        return Err(invalid("p_fn", "must be a probability"));
    }
    Ok(gamma_erasure * t_check * p_fn)
}

/// Decay rate of the average channel fidelity, `(gamma_relax + 2 gamma_phase) / 3`.
pub fn channel_fidelity_decay(gamma_relax: f64, gamma_phase: f64) -> f64 {
    (gamma_relax + 2.0 * gamma_phase) / 3.0
}

/// Ratio of the reference decay rate to the improved one.
pub fn gain_factor(gamma_reference: f64, gamma_improved: f64) -> f64 {
    gamma_reference / gamma_improved
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn starts_at_one_and_rejects_fractional_cycles() {
        assert_eq!(analytic_p1l(2e3, 11.9e-6, 13e-6, 0.0).unwrap(), 1.0);
        assert!(analytic_p1l(2e3, 11.9e-6, 13e-6, 20e-6).is_err());
        assert!(analytic_p1l(2e3, 11.9e-6, 13e-6, 26e-6).is_ok());
    }

    #[test]
    fn long_time_slope() {
        let (kappa, tau): (f64, f64) = (1.0 / 466e-6, 11.9e-6);
        let a = analytic_p1l_cycles(kappa, tau, 500).unwrap().ln();
        let b = analytic_p1l_cycles(kappa, tau, 501).unwrap().ln();
        assert_relative_eq!(b - a, -2.0 * kappa * tau, max_relative = 0.01);
    }

    #[test]
    fn rate_scaling() {
        let r = intrinsic_relaxation_rate(1.0 / 466e-6, 11.9e-6, 13e-6);
        assert_relative_eq!(r, 4.0 * intrinsic_relaxation_rate(1.0 / 466e-6, 5.95e-6, 13e-6));
        assert_eq!(intrinsic_relaxation_rate(1e3, 0.0, 13e-6), 0.0);
        assert_eq!(missed_erasure_probability(1e4, 1e-6, 0.0).unwrap(), 0.0);
    }
}
