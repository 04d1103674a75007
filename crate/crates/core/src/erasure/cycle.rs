use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ErasureQubitConfig;
use crate::channels::{
    dephasing_collapse_op, photon_loss_kraus, thermal_loss_collapse_ops, KrausChannel,
    LindbladSpec, SuperOperator,
};
use crate::error::{Error, Result};
use crate::hilbert::{projector, CMatrix, DensityMatrix, FockSpace};
use crate::measure::{check_instrument, DetectionErrorModel};

/// Projected traces below this count as a fully erased state.
const ERASED_FLOOR: f64 = 1e-12;

/// `|0><0| + |2><2|`.
pub fn code_projector(space: &FockSpace) -> CMatrix {
    projector(space, &[0, 2])
}

/// Logical bit flip: swaps `|0>` and `|2>`, identity on every other level.
pub fn logical_x(space: &FockSpace) -> CMatrix {
    let mut x = space.identity();
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    x[(0, 0)] = zero;
    x[(2, 2)] = zero;
    x[(0, 2)] = one;
    x[(2, 0)] = one;
    x
}

/// Ideal erasure check: projects onto the code space and renormalizes.
///
/// Returns the projected state and the projected trace (the survival
/// probability of postselection).
pub fn erasure_detection_channel(rho: &DensityMatrix) -> Result<(DensityMatrix, f64)> {
    let tr = rho.trace();
    if !(tr > 0.0 && tr <= 1.0 + 1e-9) {
        return Err(Error::InvalidState(format!("input trace {tr} outside (0, 1]")));
    }
    let p = code_projector(&rho.space());
    let projected = DensityMatrix::from_matrix_unchecked(&p * rho.elements() * &p);
    let survival = projected.trace();
    if survival < ERASED_FLOOR {
        return Err(Error::FullyErased(survival));
    }
    Ok((projected.scaled(1.0 / survival), survival))
}

/// Idle and echo pattern of one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Start in `|1_L>`, idle then check.
    Relaxation,
    /// Start in `|+x_L>`, idle then check.
    Ramsey,
    /// Start in `|+x_L>`, idle `tau/2`, ideal `X_L`, idle `tau/2`, check.
    Cpmg,
}

impl Protocol {
    pub fn initial_state(self, space: &FockSpace) -> Result<DensityMatrix> {
        match self {
            Protocol::Relaxation => DensityMatrix::fock(space, 2),
            Protocol::Ramsey | Protocol::Cpmg => {
                let h = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
                Ok(crate::hilbert::Ket::superposition(space, &[(0, h), (2, h)])?.to_density())
            }
        }
    }
}

/// One cycle as an ordered list of operations; the last one is the check's
/// '0' (keep) branch.
#[derive(Debug, Clone)]
pub struct CycleChannel {
    steps: Vec<KrausChannel>,
    detection: DetectionErrorModel,
    space: FockSpace,
}

impl CycleChannel {
    pub fn new(config: &ErasureQubitConfig, protocol: Protocol) -> Result<Self> {
        config.validate()?;
        let space = FockSpace::new(config.dim)?;
        let trailing = if config.options.idle_during_check { config.t_check() } else { 0.0 };
        let mut steps = Vec::new();
        match protocol {
            Protocol::Relaxation | Protocol::Ramsey => {
                steps.push(idle_channel(config, &space, config.tau + trailing)?);
            }
            Protocol::Cpmg => {
                steps.push(idle_channel(config, &space, config.tau / 2.0)?);
                steps.push(KrausChannel::unitary(logical_x(&space))?);
                steps.push(idle_channel(config, &space, config.tau / 2.0 + trailing)?);
            }
        }
        let detection = if config.options.detection_errors {
            config.detection_errors.clone()
        } else {
            DetectionErrorModel::ideal()
        };
        let keep = if config.options.detection_errors {
            let [keep, _] = check_instrument(&space, &detection)?;
            keep
        } else {
            KrausChannel::new(vec![code_projector(&space)], false)?
        };
        steps.push(keep);
        Ok(Self {
            steps,
            detection,
            space,
        })
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    /// Operations before the check.
    pub fn idle_steps(&self) -> &[KrausChannel] {
        &self.steps[..self.steps.len() - 1]
    }

    /// Error model the check samples from (ideal when detection errors are off).
    pub fn detection(&self) -> &DetectionErrorModel {
        &self.detection
    }

    /// Unnormalized cycle map as a superoperator.
    pub fn superoperator(&self) -> Result<SuperOperator> {
        let mut s = self.steps[0].to_superoperator();
        for step in &self.steps[1..] {
            s = s.then(&step.to_superoperator())?;
        }
        Ok(s)
    }

    /// Applies one cycle; returns the renormalized kept state and the
    /// probability that the check reported '0'.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<(DensityMatrix, f64)> {
        let mut out = rho.clone();
        for step in &self.steps {
            out = step.apply_unnormalized(&out)?;
        }
        let survival = out.trace();
        if survival < ERASED_FLOOR {
            return Err(Error::FullyErased(survival));
        }
        Ok((out.scaled(1.0 / survival), survival))
    }
}

/// Idle evolution over `duration` under the configured idle physics.
pub(crate) fn idle_channel(
    config: &ErasureQubitConfig,
    space: &FockSpace,
    duration: f64,
) -> Result<KrausChannel> {
    let kappa = config.kappa();
    let opts = config.options;
    if opts.no_jump_only {
        return photon_loss_kraus(kappa, duration, space, 0);
    }
    if !opts.thermal && !opts.dephasing {
        return photon_loss_kraus(kappa, duration, space, space.dim() - 1);
    }
    let nth = if opts.thermal { config.params.nth_c } else { 0.0 };
    let mut ops = thermal_loss_collapse_ops(config.params.t1_c, nth, space)?;
    if opts.dephasing {
        ops.push(dephasing_collapse_op(config.params.tphi_c, space)?);
    }
    LindbladSpec::dissipative(space, ops)?
        .propagator(duration)?
        .to_kraus(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Ket;
    use approx::assert_abs_diff_eq;

    #[test]
    fn projector_properties() {
        let s = FockSpace::new(4).unwrap();
        let p = code_projector(&s);
        assert_eq!(&p * &p, p);
        assert_eq!(p.trace().re, 2.0);
        let one = Ket::fock(&s, 1).unwrap();
        assert!((&p * one.amplitudes()).norm() == 0.0);
    }

    #[test]
    fn detection_channel_examples() {
        let s = FockSpace::new(4).unwrap();
        let two = DensityMatrix::fock(&s, 2).unwrap();
        let (out, p) = erasure_detection_channel(&two).unwrap();
        assert_eq!(p, 1.0);
        assert_eq!(out, two);

        let mix = DensityMatrix::maximally_mixed(&s, &[1, 2]).unwrap();
        let (out, p) = erasure_detection_channel(&mix).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
        assert!((out.elements() - two.elements()).norm() < 1e-15);

        let h = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
        let plus = Ket::superposition(&s, &[(0, h), (2, h)]).unwrap().to_density();
        let (out, _) = erasure_detection_channel(&plus).unwrap();
        assert_abs_diff_eq!(out.element(0, 2).re, plus.element(0, 2).re, epsilon = 1e-15);

        let one = DensityMatrix::fock(&s, 1).unwrap();
        assert!(matches!(erasure_detection_channel(&one), Err(Error::FullyErased(_))));
    }

    #[test]
    fn zero_loss_cycle_is_identity() {
        let cfg = ErasureQubitConfig::loss_only(1e3, 11.9e-6, 13e-6, 4);
        let cfg = ErasureQubitConfig {
            params: crate::channels::SystemParams {
                t1_c: f64::INFINITY,
                ..cfg.params
            },
            ..cfg
        };
        let cycle = CycleChannel::new(&cfg, Protocol::Relaxation).unwrap();
        let rho = Protocol::Ramsey.initial_state(&cycle.space()).unwrap();
        let (out, p) = cycle.apply(&rho).unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-15);
        assert!((out.elements() - rho.elements()).norm() < 1e-15);
    }

    #[test]
    fn single_cycle_survival_from_two() {
        let kappa = 1.0 / 466e-6;
        let tau = 11.9e-6;
        let cfg = ErasureQubitConfig::loss_only(kappa, tau, 13e-6, 3);
        let cycle = CycleChannel::new(&cfg, Protocol::Relaxation).unwrap();
        let rho = DensityMatrix::fock(&cycle.space(), 2).unwrap();
        let (_, p) = cycle.apply(&rho).unwrap();
        let q = (-kappa * tau).exp();
        assert_abs_diff_eq!(p, q * q + (1.0 - q).powi(2), epsilon = 1e-14);
        let s = cycle.superoperator().unwrap().apply(&rho).unwrap();
        assert_abs_diff_eq!(s.trace(), p, epsilon = 1e-14);
    }

    #[test]
    fn logical_x_is_involution() {
        let s = FockSpace::new(4).unwrap();
        let x = logical_x(&s);
        assert_eq!(&x * &x, s.identity());
    }
}
