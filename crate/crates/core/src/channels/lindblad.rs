use nalgebra::DVector;
use num_complex::Complex64;

use super::kraus::SuperOperator;
use super::params::{angular, SystemParams};
use crate::error::{invalid, Error, Result};
use crate::hilbert::{
    annihilation, creation, hermiticity_error, number_operator, spectral_norm, CMatrix,
    DensityMatrix, FockSpace,
};

/// Largest allowed `dt * (rate scale + |H|)` for one RK4 step.
pub const MAX_STEP_SCALE: f64 = 0.1;

/// Largest Hilbert-space dimension accepted by the exact propagator.
pub const EXACT_MAX_DIM: usize = 20;

/// A jump operator with its rate (1/s).
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseOp {
    pub operator: CMatrix,
    pub rate: f64,
}

impl CollapseOp {
    pub fn new(operator: CMatrix, rate: f64) -> Self {
        Self { operator, rate }
    }
}

/// Time-independent master equation `d rho/dt = -i[H, rho] + sum_k rate_k D[L_k] rho`.
///
/// `H` is in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladSpec {
    hamiltonian: CMatrix,
    collapse_ops: Vec<CollapseOp>,
}

impl LindbladSpec {
    pub fn new(hamiltonian: CMatrix, collapse_ops: Vec<CollapseOp>) -> Result<Self> {
        let dim = hamiltonian.nrows();
        if hamiltonian.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: hamiltonian.ncols(),
            });
        }
        let scale = spectral_norm(&hamiltonian).max(1.0);
        if hermiticity_error(&hamiltonian) > 1e-12 * scale {
            return Err(invalid("hamiltonian", "must be Hermitian"));
        }
        for op in &collapse_ops {
            if op.operator.nrows() != dim || op.operator.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: op.operator.nrows(),
                });
            }
            if !(op.rate >= 0.0 && op.rate.is_finite()) {
                return Err(invalid("rate", format!("collapse rates must be >= 0, got {}", op.rate)));
            }
        }
        Ok(Self {
            hamiltonian,
            collapse_ops,
        })
    }

    /// Dissipation only, `H = 0`.
    pub fn dissipative(space: &FockSpace, collapse_ops: Vec<CollapseOp>) -> Result<Self> {
        Self::new(space.zeros(), collapse_ops)
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn collapse_ops(&self) -> &[CollapseOp] {
        &self.collapse_ops
    }

    /// Rate scale used by the step-size check: `max_k rate_k |L_k|^2 + |H|`.
    pub fn stiffness(&self) -> f64 {
        let dissipative = self
            .collapse_ops
            .iter()
            .map(|c| c.rate * spectral_norm(&c.operator).powi(2))
            .fold(0.0, f64::max);
        dissipative + spectral_norm(&self.hamiltonian)
    }

    /// Liouvillian acting on column-stacked density matrices.
    pub fn liouvillian(&self) -> CMatrix {
        let d = self.dim();
        let id = CMatrix::identity(d, d);
        let minus_i = Complex64::new(0.0, -1.0);
        let h = &self.hamiltonian;
        let mut l = (id.kronecker(h) - h.transpose().kronecker(&id)) * minus_i;
        for c in &self.collapse_ops {
            if c.rate == 0.0 {
                continue;
            }
            let op = &c.operator;
            let ldl = op.adjoint() * op;
            let term = op.conjugate().kronecker(op)
                - id.kronecker(&ldl).scale(0.5)
                - ldl.transpose().kronecker(&id).scale(0.5);
            l += term.scale(c.rate);
        }
        l
    }

    /// Exact propagator `exp(L t)` as a superoperator.
    pub fn propagator(&self, duration: f64) -> Result<SuperOperator> {
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(invalid("duration", format!("must be >= 0, got {duration}")));
        }
        if self.dim() > EXACT_MAX_DIM {
            return Err(invalid(
                "dim",
                format!("exact propagation supports dim <= {EXACT_MAX_DIM}, got {}", self.dim()),
            ));
        }
        let generator = self.liouvillian().scale(duration);
        SuperOperator::new(self.dim(), generator.exp())
    }
}

/// Thermal amplitude damping: `(a, (1+n_th)/T1)` and, for `n_th > 0`, `(a†, n_th/T1)`.
pub fn thermal_loss_collapse_ops(t1: f64, n_th: f64, space: &FockSpace) -> Result<Vec<CollapseOp>> {
    if !(t1 > 0.0) {
        return Err(invalid("t1", format!("must be > 0, got {t1}")));
    }
    if !(0.0..1.0).contains(&n_th) {
        return Err(invalid("n_th", format!("must be in [0, 1), got {n_th}")));
    }
    let mut ops = vec![CollapseOp::new(annihilation(space), (1.0 + n_th) / t1)];
    if n_th > 0.0 {
        ops.push(CollapseOp::new(creation(space), n_th / t1));
    }
    Ok(ops)
}

/// Pure dephasing `(a†a, 2/T_phi)`; the `|0>,|1>` coherence then decays at `1/T_phi`.
/// An infinite `T_phi` gives rate zero.
pub fn dephasing_collapse_op(t_phi: f64, space: &FockSpace) -> Result<CollapseOp> {
    if !(t_phi > 0.0) {
        return Err(invalid("t_phi", format!("must be > 0, got {t_phi}")));
    }
    let rate = if t_phi.is_infinite() { 0.0 } else { 2.0 / t_phi };
    Ok(CollapseOp::new(number_operator(space), rate))
}

/// Fixed-step RK4 integration of the master equation.
///
/// The interval is split into `ceil(duration / dt)` equal steps.
pub fn lindblad_evolve(
    rho: &DensityMatrix,
    spec: &LindbladSpec,
    duration: f64,
    dt: f64,
) -> Result<DensityMatrix> {
    check_dims(rho, spec)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("must be > 0, got {dt}")));
    }
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(invalid("duration", format!("must be >= 0, got {duration}")));
    }
    let scale = dt * spec.stiffness();
    if scale > MAX_STEP_SCALE {
        return Err(Error::StepTooLarge(scale));
    }
    if duration == 0.0 {
        return Ok(rho.clone());
    }
    let steps = (duration / dt).ceil().max(1.0) as usize;
    let h = duration / steps as f64;
    let l = spec.liouvillian();
    let d = spec.dim();
    let mut v = DVector::from_column_slice(rho.elements().as_slice());
    for _ in 0..steps {
        let k1 = &l * &v;
        let k2 = &l * (&v + &k1 * Complex64::from(h / 2.0));
        let k3 = &l * (&v + &k2 * Complex64::from(h / 2.0));
        let k4 = &l * (&v + &k3 * Complex64::from(h));
        v += (k1 + k2 * Complex64::from(2.0) + k3 * Complex64::from(2.0) + k4)
            * Complex64::from(h / 6.0);
    }
    let m = CMatrix::from_column_slice(d, d, v.as_slice());
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

/// Exact evolution through the matrix exponential of the Liouvillian.
pub fn lindblad_evolve_exact(
    rho: &DensityMatrix,
    spec: &LindbladSpec,
    duration: f64,
) -> Result<DensityMatrix> {
    check_dims(rho, spec)?;
    if duration == 0.0 {
        return Ok(rho.clone());
    }
    spec.propagator(duration)?.apply(rho)
}

fn check_dims(rho: &DensityMatrix, spec: &LindbladSpec) -> Result<()> {
    if rho.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: rho.dim(),
        });
    }
    Ok(())
}

/// Rotating-frame dispersive Hamiltonian of the transmon (`transmon_levels`)
/// and cavity (`cavity_levels`), in rad/s.
///
/// Basis index is `q * cavity_levels + c`. Terms:
/// `s (K_q/2 a_q†²a_q² + K_c/2 a_c†²a_c² + chi_qc a_q†a_q a_c†a_c)` with
/// `s = params.kerr_sign.factor()`, plus `s chi'_qc/2 a_q†a_q a_c†²a_c²` when
/// `second_order` is set.
pub fn dispersive_hamiltonian(
    params: &SystemParams,
    transmon_levels: usize,
    cavity_levels: usize,
    second_order: bool,
) -> Result<CMatrix> {
    let q_space = FockSpace::new(transmon_levels)?;
    let c_space = FockSpace::new(cavity_levels)?;
    let s = params.kerr_sign.factor();
    let nq = |q: usize| q as f64;
    let nc = |c: usize| c as f64;
    let pairs = |n: f64| n * (n - 1.0);
    let dim = q_space.dim() * c_space.dim();
    let mut h = CMatrix::zeros(dim, dim);
    for q in 0..transmon_levels {
        for c in 0..cavity_levels {
            let mut e = angular(params.k_q) / 2.0 * pairs(nq(q))
                + angular(params.k_c) / 2.0 * pairs(nc(c))
                + angular(params.chi_qc) * nq(q) * nc(c);
            if second_order {
                e += angular(params.chi_qc_2) / 2.0 * nq(q) * pairs(nc(c));
            }
            let i = q * cavity_levels + c;
            h[(i, i)] = Complex64::from(s * e);
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::kraus::{apply_channel, photon_loss_kraus};
    use crate::hilbert::Ket;
    use approx::assert_abs_diff_eq;

    fn loss_spec(space: &FockSpace, kappa: f64) -> LindbladSpec {
        LindbladSpec::dissipative(space, vec![CollapseOp::new(annihilation(space), kappa)]).unwrap()
    }

    #[test]
    fn single_photon_decays_exponentially() {
        let s = FockSpace::new(3).unwrap();
        let t1 = 466e-6;
        let spec = loss_spec(&s, 1.0 / t1);
        let rho = DensityMatrix::fock(&s, 1).unwrap();
        let t = 200e-6;
        let out = lindblad_evolve(&rho, &spec, t, 0.5e-6).unwrap();
        assert_abs_diff_eq!(out.population(1), (-t / t1).exp(), epsilon = 1e-6);
        assert_abs_diff_eq!(out.trace(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn zero_duration_is_identity() {
        let s = FockSpace::new(3).unwrap();
        let spec = loss_spec(&s, 1e3);
        let rho = DensityMatrix::fock(&s, 2).unwrap();
        assert_eq!(lindblad_evolve(&rho, &spec, 0.0, 1e-6).unwrap(), rho);
        assert_eq!(lindblad_evolve_exact(&rho, &spec, 0.0).unwrap(), rho);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let s = FockSpace::new(3).unwrap();
        let spec = loss_spec(&s, 1e6);
        let rho = DensityMatrix::fock(&s, 2).unwrap();
        let err = lindblad_evolve(&rho, &spec, 1e-5, 1e-6).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge(_)));
    }

    #[test]
    fn loss_matches_kraus_map() {
        let s = FockSpace::new(4).unwrap();
        let kappa = 1.0 / 466e-6;
        let tau = 11.9e-6;
        let rho = Ket::superposition(
            &s,
            &[(0, Complex64::new(1.0, 0.0)), (2, Complex64::new(0.0, 1.0)), (3, Complex64::new(0.5, 0.0))],
        )
        .unwrap()
        .to_density();
        let spec = loss_spec(&s, kappa);
        let kraus = photon_loss_kraus(kappa, tau, &s, 3).unwrap();
        let (expected, _) = apply_channel(&kraus, &rho, false).unwrap();
        let rk4 = lindblad_evolve(&rho, &spec, tau, 0.1e-6).unwrap();
        let exact = lindblad_evolve_exact(&rho, &spec, tau).unwrap();
        assert!((rk4.elements() - expected.elements()).norm() < 1e-8);
        assert!((exact.elements() - expected.elements()).norm() < 1e-10);
    }

    #[test]
    fn dephasing_matches_t2_relation() {
        let s = FockSpace::new(3).unwrap();
        let (t1, tphi) = (466e-6, 3073e-6);
        let mut ops = thermal_loss_collapse_ops(t1, 0.0, &s).unwrap();
        ops.push(dephasing_collapse_op(tphi, &s).unwrap());
        let spec = LindbladSpec::dissipative(&s, ops).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = Ket::superposition(&s, &[(0, h.into()), (1, h.into())]).unwrap().to_density();
        let t = 300e-6;
        let out = lindblad_evolve_exact(&plus, &spec, t).unwrap();
        let rate = 1.0 / (2.0 * t1) + 1.0 / tphi;
        assert_abs_diff_eq!(out.element(0, 1).re, 0.5 * (-rate * t).exp(), epsilon = 1e-12);

        let dephase_only =
            LindbladSpec::dissipative(&s, vec![dephasing_collapse_op(tphi, &s).unwrap()]).unwrap();
        let plus02 = Ket::superposition(&s, &[(0, h.into()), (2, h.into())]).unwrap().to_density();
        let out = lindblad_evolve_exact(&plus02, &dephase_only, t).unwrap();
        assert_abs_diff_eq!(out.element(0, 2).re, 0.5 * (-4.0 * t / tphi).exp(), epsilon = 1e-12);
        assert_eq!(dephasing_collapse_op(f64::INFINITY, &s).unwrap().rate, 0.0);
    }

    #[test]
    fn thermal_rates() {
        let s = FockSpace::new(4).unwrap();
        let p = SystemParams::default();
        let ops = thermal_loss_collapse_ops(p.t1_c, p.nth_c, &s).unwrap();
        assert_eq!(ops.len(), 2);
        let up = ops[1].rate;
        assert!(((1.0 / up) / 64.7e-3 - 1.0).abs() < 0.01);
        // |2> -> |1> via a: |<1|a|2>|^2 = 2
        let down = 2.0 * ops[0].rate;
        assert!(((1.0 / down) / 231e-6 - 1.0).abs() < 0.01);
        assert_eq!(thermal_loss_collapse_ops(p.t1_c, 0.0, &s).unwrap().len(), 1);
    }

    #[test]
    fn semigroup_property() {
        let s = FockSpace::new(4).unwrap();
        let p = SystemParams::default();
        let mut ops = thermal_loss_collapse_ops(p.t1_c, p.nth_c, &s).unwrap();
        ops.push(dephasing_collapse_op(p.tphi_c, &s).unwrap());
        let spec = LindbladSpec::new(
            crate::hilbert::diagonal(&s, |n| 1e4 * (n * n) as f64),
            ops,
        )
        .unwrap();
        let rho = Ket::superposition(&s, &[(0, 1.0.into()), (2, 1.0.into())]).unwrap().to_density();
        let a = lindblad_evolve(&rho, &spec, 30e-6, 0.2e-6).unwrap();
        let ab = lindblad_evolve(&a, &spec, 50e-6, 0.2e-6).unwrap();
        let direct = lindblad_evolve(&rho, &spec, 80e-6, 0.2e-6).unwrap();
        assert!((ab.elements() - direct.elements()).norm() < 1e-8);
        assert!(hermiticity_error(direct.elements()) < 1e-9);
    }

    #[test]
    fn dispersive_energies() {
        let p = SystemParams::default();
        let zero = SystemParams {
            k_q: 0.0,
            k_c: 0.0,
            chi_qc: 0.0,
            chi_qc_2: 0.0,
            ..p.clone()
        };
        assert!(dispersive_hamiltonian(&zero, 3, 6, true).unwrap().iter().all(|z| z.norm() == 0.0));
        let h = dispersive_hamiltonian(&p, 3, 6, false).unwrap();
        assert_eq!(hermiticity_error(&h), 0.0);
        let e = |q: usize, c: usize| h[(q * 6 + c, q * 6 + c)].re;
        let shift = e(1, 2) - e(1, 0);
        assert_abs_diff_eq!(shift, -angular(2.0 * p.chi_qc + p.k_c), epsilon = 1e-6);
        let h2 = dispersive_hamiltonian(&p, 3, 6, true).unwrap();
        let e2 = |q: usize, c: usize| h2[(q * 6 + c, q * 6 + c)].re;
        assert_abs_diff_eq!(
            e2(1, 2) - e2(1, 0),
            -angular(2.0 * p.chi_qc + p.k_c + p.chi_qc_2),
            epsilon = 1e-6
        );
    }
}
