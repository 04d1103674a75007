use nalgebra::DMatrix;
use crate::error::{invalid, Error, Result};
use crate::hilbert::{
    annihilation, diagonal, hermitian_eigen, identity_error, CMatrix, DensityMatrix, FockSpace,
};

/// Operator-sum representation of a completely positive map.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    operators: Vec<CMatrix>,
    trace_preserving: bool,
}

impl KrausChannel {
    /// Checks `sum E†E = I` (1e-9) when `trace_preserving`, otherwise
    /// `sum E†E <= I` (largest eigenvalue at most 1 + 1e-9).
    pub fn new(operators: Vec<CMatrix>, trace_preserving: bool) -> Result<Self> {
        let Some(first) = operators.first() else {
            return Err(invalid("operators", "a channel needs at least one Kraus operator"));
        };
        let dim = first.nrows();
        for op in &operators {
            if op.nrows() != dim || op.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: op.nrows().max(op.ncols()),
                });
            }
        }
        let channel = Self {
            operators,
            trace_preserving,
        };
        let sum = channel.completeness();
        if trace_preserving {
            let err = identity_error(&sum);
            if err > 1e-9 {
                return Err(invalid(
                    "operators",
                    format!("flagged trace preserving but sum E†E deviates from I by {err:.2e}"),
                ));
            }
        } else {
            let (values, _) = hermitian_eigen(&sum);
            let max = values.last().copied().unwrap_or(0.0);
            if max > 1.0 + 1e-9 {
                return Err(invalid(
                    "operators",
                    format!("sum E†E has eigenvalue {max} > 1; map increases trace"),
                ));
            }
        }
        Ok(channel)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            operators: vec![CMatrix::identity(dim, dim)],
            trace_preserving: true,
        }
    }

    /// Single-operator channel `rho -> U rho U†`.
    pub fn unitary(u: CMatrix) -> Result<Self> {
        Self::new(vec![u], true)
    }

    pub fn dim(&self) -> usize {
        self.operators[0].nrows()
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    /// `sum_k E_k† E_k`.
    pub fn completeness(&self) -> CMatrix {
        let dim = self.dim();
        self.operators
            .iter()
            .fold(CMatrix::zeros(dim, dim), |acc, e| acc + e.adjoint() * e)
    }

    /// Channel applying `self` first, then `next`.
    pub fn then(&self, next: &KrausChannel) -> Result<Self> {
        if self.dim() != next.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: next.dim(),
            });
        }
        let mut ops = Vec::with_capacity(self.operators.len() * next.operators.len());
        for b in &next.operators {
            for a in &self.operators {
                let prod = b * a;
                if prod.iter().any(|z| z.norm_sqr() > 0.0) {
                    ops.push(prod);
                }
            }
        }
        if ops.is_empty() {
            ops.push(CMatrix::zeros(self.dim(), self.dim()));
        }
        Ok(Self {
            operators: ops,
            trace_preserving: self.trace_preserving && next.trace_preserving,
        })
    }

    /// Unnormalized `sum_k E_k rho E_k†`.
    pub fn apply_unnormalized(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rho.dim(),
            });
        }
        let r = rho.elements();
        let dim = self.dim();
        let out = self
            .operators
            .iter()
            .fold(CMatrix::zeros(dim, dim), |acc, e| acc + e * r * e.adjoint());
        Ok(DensityMatrix::from_matrix_unchecked(out))
    }

    pub fn to_superoperator(&self) -> SuperOperator {
        let d = self.dim();
        let mut m = CMatrix::zeros(d * d, d * d);
        for e in &self.operators {
            m += e.conjugate().kronecker(e);
        }
        SuperOperator { dim: d, matrix: m }
    }
}

/// Applies `channel` to `rho`, returning the output and its trace.
///
/// With `normalize`, a trace-decreasing channel's output is rescaled to unit
/// trace; trace-preserving channels are never rescaled.
pub fn apply_channel(
    channel: &KrausChannel,
    rho: &DensityMatrix,
    normalize: bool,
) -> Result<(DensityMatrix, f64)> {
    let out = channel.apply_unnormalized(rho)?;
    let probability = out.trace();
    if normalize && !channel.is_trace_preserving() {
        if !(probability > 0.0) {
            return Err(Error::FullyErased(probability));
        }
        return Ok((out.scaled(1.0 / probability), probability));
    }
    Ok((out, probability))
}

/// Photon-loss Kraus operators
/// `E_k = sqrt((1 - e^{-kappa tau})^k / k!) e^{-kappa tau a†a / 2} a^k`
/// for `k = 0..=max_jumps`.
pub fn photon_loss_kraus(
    kappa: f64,
    tau: f64,
    space: &FockSpace,
    max_jumps: usize,
) -> Result<KrausChannel> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(invalid("kappa", format!("must be >= 0, got {kappa}")));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(invalid("tau", format!("must be >= 0, got {tau}")));
    }
    if max_jumps >= space.dim() {
        return Err(invalid(
            "max_jumps",
            format!("must be < dim = {}, got {max_jumps}", space.dim()),
        ));
    }
    let x = kappa * tau;
    let loss = -(-x).exp_m1();
    let damping = diagonal(space, |n| (-x * n as f64 / 2.0).exp());
    let a = annihilation(space);
    let mut a_k = space.identity();
    let mut factorial = 1.0;
    let mut ops = Vec::with_capacity(max_jumps + 1);
    for k in 0..=max_jumps {
        if k > 0 {
            a_k = &a_k * &a;
            factorial *= k as f64;
        }
        let weight = (loss.powi(k as i32) / factorial).sqrt();
        ops.push((&damping * &a_k).scale(weight));
    }
    let trace_preserving = max_jumps + 1 >= space.dim();
    Ok(KrausChannel {
        operators: ops,
        trace_preserving,
    })
}

/// Linear map on column-stacked density matrices, `vec(E(rho)) = S vec(rho)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    matrix: CMatrix,
}

impl SuperOperator {
    pub fn new(dim: usize, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != dim * dim || matrix.ncols() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: matrix.nrows(),
            });
        }
        Ok(Self { dim, matrix })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.dim(),
            });
        }
        let v = nalgebra::DVector::from_column_slice(rho.elements().as_slice());
        let out = &self.matrix * v;
        Ok(DensityMatrix::from_matrix_unchecked(DMatrix::from_column_slice(
            self.dim,
            self.dim,
            out.as_slice(),
        )))
    }

    /// `self` first, then `next`.
    pub fn then(&self, next: &SuperOperator) -> Result<Self> {
        if self.dim != next.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: next.dim,
            });
        }
        Ok(Self {
            dim: self.dim,
            matrix: &next.matrix * &self.matrix,
        })
    }

    /// Choi matrix with entries `<a| E(|i><j|) |b>` at `(i d + a, j d + b)`.
    pub fn choi(&self) -> CMatrix {
        let d = self.dim;
        let mut c = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                for a in 0..d {
                    for b in 0..d {
                        c[(i * d + a, j * d + b)] = self.matrix[(a + b * d, i + j * d)];
                    }
                }
            }
        }
        c
    }

    /// Canonical Kraus decomposition from the Choi spectrum. Eigenvalues below
    /// `1e-14` times the largest are dropped.
    pub fn to_kraus(&self, trace_preserving: bool) -> Result<KrausChannel> {
        let d = self.dim;
        let choi = self.choi();
        let (values, vectors) = hermitian_eigen(&choi);
        let max = values.last().copied().unwrap_or(0.0);
        if values[0] < -1e-9 * max.max(1.0) {
            return Err(Error::Numerical(format!(
                "map is not completely positive (Choi eigenvalue {:.3e})",
                values[0]
            )));
        }
        let mut ops = Vec::new();
        for (k, &lambda) in values.iter().enumerate().rev() {
            if lambda <= 1e-14 * max {
                continue;
            }
            let v = vectors.column(k);
            ops.push(DMatrix::from_column_slice(d, d, v.as_slice()).scale(lambda.sqrt()));
        }
        if ops.is_empty() {
            ops.push(CMatrix::zeros(d, d));
        }
        KrausChannel::new(ops, trace_preserving)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_loss_is_identity() {
        let s = FockSpace::new(4).unwrap();
        let ch = photon_loss_kraus(1e3, 0.0, &s, 3).unwrap();
        assert_eq!(ch.operators()[0], s.identity());
        for e in &ch.operators()[1..] {
            assert!(e.iter().all(|z| z.norm() == 0.0));
        }
        assert!(ch.is_trace_preserving());
    }

    #[test]
    fn no_jump_operator_is_diagonal_damping() {
        let s = FockSpace::new(3).unwrap();
        let x = 0.3;
        let ch = photon_loss_kraus(x, 1.0, &s, 2).unwrap();
        let e0 = &ch.operators()[0];
        assert_abs_diff_eq!(e0[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e0[(1, 1)].re, (-x / 2.0).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(e0[(2, 2)].re, (-x).exp(), epsilon = 1e-15);
        assert!(identity_error(&ch.completeness()) < 1e-12);
    }

    #[test]
    fn partial_jump_set_is_trace_decreasing() {
        let s = FockSpace::new(4).unwrap();
        let ch = photon_loss_kraus(0.5, 1.0, &s, 1).unwrap();
        assert!(!ch.is_trace_preserving());
        assert!(photon_loss_kraus(-1.0, 1.0, &s, 1).is_err());
        assert!(photon_loss_kraus(1.0, -1.0, &s, 1).is_err());
        assert!(photon_loss_kraus(1.0, 1.0, &s, 4).is_err());
    }

    #[test]
    fn loss_on_two_photons_is_binomial() {
        let s = FockSpace::new(3).unwrap();
        let x: f64 = 0.1;
        let ch = photon_loss_kraus(x, 1.0, &s, 2).unwrap();
        let rho = DensityMatrix::fock(&s, 2).unwrap();
        let (out, p) = apply_channel(&ch, &rho, false).unwrap();
        let q = (-x).exp();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.population(2), q * q, epsilon = 1e-14);
        assert_abs_diff_eq!(out.population(1), 2.0 * q * (1.0 - q), epsilon = 1e-14);
        assert_abs_diff_eq!(out.population(0), (1.0 - q) * (1.0 - q), epsilon = 1e-14);
    }

    #[test]
    fn vacuum_is_dark_and_identity_is_trivial() {
        let s = FockSpace::new(4).unwrap();
        let vac = DensityMatrix::fock(&s, 0).unwrap();
        let ch = photon_loss_kraus(2.0, 1.0, &s, 3).unwrap();
        let (out, p) = apply_channel(&ch, &vac, true).unwrap();
        assert_eq!(p, 1.0);
        assert!((out.elements() - vac.elements()).norm() < 1e-15);
        let (same, p) = apply_channel(&KrausChannel::identity(4), &vac, false).unwrap();
        assert_eq!(p, 1.0);
        assert_eq!(same, vac);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let s = FockSpace::new(3).unwrap();
        let rho = DensityMatrix::fock(&s, 0).unwrap();
        let err = apply_channel(&KrausChannel::identity(4), &rho, false).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn kraus_round_trip_through_choi() {
        let s = FockSpace::new(4).unwrap();
        let ch = photon_loss_kraus(0.4, 1.0, &s, 3).unwrap();
        let again = ch.to_superoperator().to_kraus(true).unwrap();
        let rho = crate::hilbert::Ket::superposition(
            &s,
            &[(0, Complex64::new(1.0, 0.0)), (2, Complex64::new(0.3, 0.5)), (3, Complex64::new(0.0, 0.2))],
        )
        .unwrap()
        .to_density();
        let a = ch.apply_unnormalized(&rho).unwrap();
        let b = again.apply_unnormalized(&rho).unwrap();
        assert!((a.elements() - b.elements()).norm() < 1e-12);
    }

    #[test]
    fn composition_matches_sequential_application() {
        let s = FockSpace::new(3).unwrap();
        let a = photon_loss_kraus(0.2, 1.0, &s, 2).unwrap();
        let b = photon_loss_kraus(0.3, 1.0, &s, 2).unwrap();
        let ab = a.then(&b).unwrap();
        let direct = photon_loss_kraus(0.5, 1.0, &s, 2).unwrap();
        let rho = DensityMatrix::fock(&s, 2).unwrap();
        let x = ab.apply_unnormalized(&rho).unwrap();
        let y = direct.apply_unnormalized(&rho).unwrap();
        assert!((x.elements() - y.elements()).norm() < 1e-14);
    }
}
