use serde::{Deserialize, Serialize};

use crate::channels::KrausChannel;
use crate::erasure::{code_projector, idle_channel, logical_x, ErasureQubitConfig, Protocol};
use crate::error::{invalid, Error, Result};
use crate::hilbert::FockSpace;

use super::check_instrument;

/// Echoed coherence versus number of checks at fixed total duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DephasingScan {
    pub tau_tot: f64,
    pub m: Vec<u64>,
    pub x_expect: Vec<f64>,
    pub survival: Vec<f64>,
    /// Slope of `ln <X_L>` versus `M` over the upper half of the scan.
    pub log_slope: Option<f64>,
    /// Per-check dephasing probability `p` with `<X_L> ~ (1 - 2p)^M`.
    pub dephasing_per_check: Option<f64>,
}

/// Starting from `|+x_L>`, splits `tau_tot` into `M` equal intervals, each
/// echoed at its midpoint by an ideal `X_L` and closed by a check.
/// `M = 0` is a single echo without any check.
pub fn induced_dephasing_scan(
    config: &ErasureQubitConfig,
    m_list: &[u64],
    tau_tot: f64,
) -> Result<DephasingScan> {
    config.validate()?;
    if !(tau_tot > 0.0 && tau_tot.is_finite()) {
        return Err(invalid("tau_tot", format!("must be > 0, got {tau_tot}")));
    }
    let space = FockSpace::new(config.dim)?;
    let x = KrausChannel::unitary(logical_x(&space))?;
    let keep = if config.options.detection_errors {
        let [keep, _] = check_instrument(&space, &config.detection_errors)?;
        keep
    } else {
        KrausChannel::new(vec![code_projector(&space)], false)?
    };
    let rho0 = Protocol::Ramsey.initial_state(&space)?;
    let mut out = DephasingScan {
        tau_tot,
        m: Vec::new(),
        x_expect: Vec::new(),
        survival: Vec::new(),
        log_slope: None,
        dephasing_per_check: None,
    };
    for &m in m_list {
        let intervals = m.max(1);
        let half = idle_channel(config, &space, tau_tot / intervals as f64 / 2.0)?;
        let mut steps = half.then(&x)?.then(&half)?.to_superoperator();
        if m > 0 {
            steps = steps.then(&keep.to_superoperator())?;
        }
        let mut rho = rho0.clone();
        let mut survival = 1.0;
        for _ in 0..intervals {
            let kept = steps.apply(&rho)?;
            let p = kept.trace();
            if p < 1e-300 {
                return Err(Error::FullyErased(p));
            }
            survival *= p;
            rho = kept.scaled(1.0 / p);
        }
        let norm = if config.postselect_final {
            rho.population(0) + rho.population(2)
        } else {
            1.0
        };
        out.m.push(m);
        out.x_expect.push(2.0 * rho.element(0, 2).re / norm);
        out.survival.push(survival);
    }
    let mut tail: Vec<(f64, f64)> = out
        .m
        .iter()
        .zip(&out.x_expect)
        .filter(|(_, x)| **x > 0.0)
        .map(|(&m, &x)| (m as f64, x.ln()))
        .collect();
    tail.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tail = &tail[tail.len() / 2..];
    if tail.len() >= 2 {
        let n = tail.len() as f64;
        let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
        let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 {
            let slope = sxy / sxx;
            out.log_slope = Some(slope);
            out.dephasing_per_check = Some((1.0 - slope.exp()) / 2.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::DetectionErrorModel;

    fn config(p_d: f64) -> ErasureQubitConfig {
        let mut cfg = ErasureQubitConfig::default();
        cfg.options.detection_errors = true;
        cfg.detection_errors = DetectionErrorModel {
            p_induced_dephasing: p_d,
            ..DetectionErrorModel::ideal()
        };
        cfg
    }

    #[test]
    fn injected_dephasing_is_recovered() {
        let m: Vec<u64> = (0..=40).step_by(2).collect();
        let scan = induced_dephasing_scan(&config(0.0026), &m, 150e-6).unwrap();
        let p = scan.dephasing_per_check.unwrap();
        assert!((p / 0.0026 - 1.0).abs() < 0.1, "recovered {p}");
    }

    #[test]
    fn loss_only_is_flat_after_rise() {
        let m: Vec<u64> = (0..=40).step_by(2).collect();
        let scan = induced_dephasing_scan(&config(0.0), &m, 150e-6).unwrap();
        let p = scan.dephasing_per_check.unwrap();
        assert!(p.abs() < 2e-4, "residual slope {p}");
        assert!(scan.x_expect[1] >= scan.x_expect[0]);
    }

    #[test]
    fn zero_checks_is_a_single_echo() {
        let scan = induced_dephasing_scan(&config(0.5), &[0], 150e-6).unwrap();
        assert_eq!(scan.survival[0], 1.0);
        let kappa: f64 = 1.0 / 466e-6;
        let mut cfg = config(0.0);
        cfg.options.detection_errors = false;
        let echo = induced_dephasing_scan(&cfg, &[0], 150e-6).unwrap();
        assert_eq!(scan.x_expect[0], echo.x_expect[0]);
        // One lost photon leaves the code space, two lost photons only feed |0>;
        // the coherence is damped by the echoed no-jump factor alone.
        assert!((echo.x_expect[0] - (-kappa * 150e-6).exp()).abs() < 1e-12);
    }
}
