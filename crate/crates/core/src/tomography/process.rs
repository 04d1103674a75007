use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::KrausChannel;
use crate::error::{invalid, Error, Result};
use crate::hilbert::{hermitian_eigen, hermitian_map, CMatrix, DensityMatrix, FockSpace, Ket};

/// Operator basis a [`ChiMatrix`] is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiBasis {
    /// `E1..E9` on `{|0>, |1>, |2>}`.
    Qutrit9,
    /// `E1..E4` restricted to `{|0>, |2>}`, i.e. `I, X, -iY, Z` up to scale.
    Logical4,
}

/// Process matrix with `rho_out = sum_mn chi_mn E_m rho E_n†`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiMatrix {
    pub elements: CMatrix,
    pub basis: ChiBasis,
    /// Set on reduced matrices whose logical block carried less than a third
    /// of the full process weight.
    pub leakage_dominated: bool,
}

impl ChiMatrix {
    fn new(elements: CMatrix, basis: ChiBasis) -> Self {
        Self {
            elements,
            basis,
            leakage_dominated: false,
        }
    }

    /// Applies the process to a qutrit state (`Qutrit9` only).
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if self.basis != ChiBasis::Qutrit9 {
            return Err(invalid("chi", "only the qutrit basis can be applied"));
        }
        let rho = rho.resized(3);
        let basis = qutrit_basis();
        let mut out = CMatrix::zeros(3, 3);
        for m in 0..9 {
            let left = &basis[m] * rho.elements();
            for n in 0..9 {
                let c = self.elements[(m, n)];
                if c != Complex64::new(0.0, 0.0) {
                    out += (&left * basis[n].adjoint()) * c;
                }
            }
        }
        Ok(DensityMatrix::from_matrix_unchecked(out))
    }

    pub fn trace(&self) -> f64 {
        self.elements.trace().re
    }
}

/// The nine qutrit basis operators, each with `Tr(E_m† E_n) = 3 delta_mn`.
pub fn qutrit_basis() -> [CMatrix; 9] {
    let r = (1.5f64).sqrt();
    let mat = |entries: &[(usize, usize, f64)], scale: f64| {
        let mut m = CMatrix::zeros(3, 3);
        for &(i, j, v) in entries {
            m[(i, j)] = Complex64::new(v * scale, 0.0);
        }
        m
    };
    [
        mat(&[(0, 0, 1.0), (2, 2, 1.0)], r),
        mat(&[(0, 2, 1.0), (2, 0, 1.0)], r),
        mat(&[(0, 2, -1.0), (2, 0, 1.0)], r),
        mat(&[(0, 0, 1.0), (2, 2, -1.0)], r),
        mat(&[(0, 1, 1.0), (1, 0, 1.0)], r),
        mat(&[(0, 1, -1.0), (1, 0, 1.0)], r),
        mat(&[(1, 2, 1.0), (2, 1, 1.0)], r),
        mat(&[(1, 2, -1.0), (2, 1, 1.0)], r),
        mat(&[(1, 1, 1.0)], 3f64.sqrt()),
    ]
}

/// The nine preparations used for process tomography:
/// `|0>, |2>, |+x_L>, |-y_L>, |1>, (|0>+|1>)/√2, (|0>-i|1>)/√2,
/// (|1>+|2>)/√2, (|1>-i|2>)/√2`.
pub fn process_tomography_inputs() -> Vec<DensityMatrix> {
    let s = FockSpace::new(3).expect("qutrit space");
    let h = FRAC_1_SQRT_2;
    let re = Complex64::new(h, 0.0);
    let im = Complex64::new(0.0, -h);
    let pairs: [&[(usize, Complex64)]; 9] = [
        &[(0, Complex64::new(1.0, 0.0))],
        &[(2, Complex64::new(1.0, 0.0))],
        &[(0, re), (2, re)],
        &[(0, re), (2, im)],
        &[(1, Complex64::new(1.0, 0.0))],
        &[(0, re), (1, re)],
        &[(0, re), (1, im)],
        &[(1, re), (2, re)],
        &[(1, re), (2, im)],
    ];
    pairs
        .iter()
        .map(|terms| {
            Ket::superposition(&s, terms)
                .expect("fixed normalized preparations")
                .to_density()
        })
        .collect()
}

fn vec_col(m: &CMatrix) -> Vec<Complex64> {
    m.iter().copied().collect()
}

/// Projects a Hermitian matrix onto the positive semidefinite cone while
/// keeping its trace, by clipping the spectrum from the bottom and spreading
/// the removed weight over the surviving eigenvalues.
fn project_psd(m: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let mut mu: Vec<f64> = values.iter().rev().copied().collect();
    let mut i = mu.len();
    let mut a = 0.0;
    while i > 0 && mu[i - 1] + a / (i as f64) < 0.0 {
        a += mu[i - 1];
        mu[i - 1] = 0.0;
        i -= 1;
    }
    for v in mu.iter_mut().take(i) {
        *v += a / i as f64;
    }
    let n = mu.len();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lambda) in mu.iter().enumerate() {
        if lambda > 0.0 {
            let col = vectors.column(n - 1 - k);
            out += (col * col.adjoint()) * Complex64::new(lambda, 0.0);
        }
    }
    (&out + out.adjoint()).scale(0.5)
}

/// Linear-inversion process tomography from nine linearly independent
/// qutrit inputs and their outputs, followed by a trace-preserving projection
/// onto Hermitian positive semidefinite matrices.
pub fn process_tomography(inputs: &[DensityMatrix], outputs: &[DensityMatrix]) -> Result<ChiMatrix> {
    if inputs.len() != 9 || outputs.len() != 9 {
        return Err(Error::DimensionMismatch {
            expected: 9,
            found: inputs.len().min(outputs.len()),
        });
    }
    let mut input_cols = CMatrix::zeros(9, 9);
    let mut output_cols = CMatrix::zeros(9, 9);
    for k in 0..9 {
        let a = vec_col(inputs[k].resized(3).elements());
        let b = vec_col(outputs[k].resized(3).elements());
        for r in 0..9 {
            input_cols[(r, k)] = a[r];
            output_cols[(r, k)] = b[r];
        }
    }
    let inverse = input_cols
        .try_inverse()
        .ok_or_else(|| invalid("inputs", "the nine inputs are not linearly independent"))?;
    let superop = output_cols * inverse;
    let chi = chi_from_superoperator(&superop);
    let chi = (&chi + chi.adjoint()).scale(0.5);
    Ok(ChiMatrix::new(project_psd(&chi), ChiBasis::Qutrit9))
}

/// `chi_mn = Tr(B_mn† S) / 9` with `B_mn = conj(E_n) ⊗ E_m`, the column-major
/// superoperator of `rho -> E_m rho E_n†`.
fn chi_from_superoperator(superop: &CMatrix) -> CMatrix {
    let basis = qutrit_basis();
    CMatrix::from_fn(9, 9, |m, n| {
        let b = basis[n].map(|z| z.conj()).kronecker(&basis[m]);
        (b.adjoint() * superop).trace() / 9.0
    })
}

/// Process matrix of a qutrit Kraus channel.
pub fn chi_from_kraus(channel: &KrausChannel) -> Result<ChiMatrix> {
    if channel.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: channel.dim(),
        });
    }
    let basis = qutrit_basis();
    let mut chi = CMatrix::zeros(9, 9);
    for k in channel.operators() {
        let c: Vec<Complex64> = basis.iter().map(|e| (e.adjoint() * k).trace() / 3.0).collect();
        for m in 0..9 {
            for n in 0..9 {
                chi[(m, n)] += c[m] * c[n].conj();
            }
        }
    }
    Ok(ChiMatrix::new(chi, ChiBasis::Qutrit9))
}

/// Keeps the `E1..E4` block, the part of the process that maps the code space
/// into itself, renormalized to unit trace.
pub fn reduced_logical_chi(chi: &ChiMatrix) -> Result<ChiMatrix> {
    if chi.basis != ChiBasis::Qutrit9 {
        return Err(invalid("chi", "expected a qutrit process matrix"));
    }
    let block = chi.elements.view((0, 0), (4, 4)).into_owned();
    let weight = block.trace().re;
    let total = chi.trace();
    let elements = if weight > 1e-12 { block.unscale(weight) } else { block };
    Ok(ChiMatrix {
        elements,
        basis: ChiBasis::Logical4,
        leakage_dominated: weight < total / 3.0,
    })
}

/// `|Tr(a b†)| / sqrt(Tr(a a†) Tr(b b†))`.
pub fn process_fidelity(a: &ChiMatrix, b: &ChiMatrix) -> Result<f64> {
    if a.basis != b.basis {
        return Err(invalid("chi", "process matrices are in different bases"));
    }
    let na = a.elements.norm_squared();
    let nb = b.elements.norm_squared();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    let overlap = (&a.elements * b.elements.adjoint()).trace().norm();
    Ok((overlap / (na * nb).sqrt()).clamp(0.0, 1.0))
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`; the smaller
/// state is zero-padded to the larger cutoff.
pub fn state_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let d = rho.dim().max(sigma.dim());
    let (rho, sigma) = (rho.resized(d), sigma.resized(d));
    let sqrt = |m: &CMatrix| hermitian_map(m, |x| Complex64::new(x.max(0.0).sqrt(), 0.0));
    let root = sqrt(rho.elements());
    let inner = &root * sigma.elements() * &root;
    let inner = (&inner + inner.adjoint()).scale(0.5);
    let (values, _) = hermitian_eigen(&inner);
    let f: f64 = values.iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok((f * f).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::erasure::logical_x;

    fn x_half() -> CMatrix {
        let s = FockSpace::new(3).expect("qutrit space");
        let x = logical_x(&s);
        let c = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let mut u = CMatrix::identity(3, 3);
        u[(0, 0)] = c;
        u[(2, 2)] = c;
        u[(0, 2)] = Complex64::new(0.0, -FRAC_1_SQRT_2) * x[(0, 2)];
        u[(2, 0)] = Complex64::new(0.0, -FRAC_1_SQRT_2) * x[(2, 0)];
        u
    }

    #[test]
    fn basis_is_orthogonal() {
        let b = qutrit_basis();
        for m in 0..9 {
            for n in 0..9 {
                let ip = (b[m].adjoint() * &b[n]).trace();
                let expect = if m == n { 3.0 } else { 0.0 };
                assert!((ip - Complex64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_process() {
        let inputs = process_tomography_inputs();
        let chi = process_tomography(&inputs, &inputs).unwrap();
        let ideal = chi_from_kraus(&KrausChannel::identity(3)).unwrap();
        assert!((&chi.elements - &ideal.elements).norm() < 1e-8);
        let reduced = reduced_logical_chi(&chi).unwrap();
        assert!((reduced.elements[(0, 0)].re - 1.0).abs() < 1e-8);
        assert!(reduced.elements.norm() - 1.0 < 1e-8);
        assert!(!reduced.leakage_dominated);
    }

    #[test]
    fn x_half_process() {
        let channel = KrausChannel::unitary(x_half()).unwrap();
        let inputs = process_tomography_inputs();
        let outputs: Vec<_> = inputs.iter().map(|r| r.transformed(&x_half())).collect();
        let chi = process_tomography(&inputs, &outputs).unwrap();
        let ideal = chi_from_kraus(&channel).unwrap();
        assert!((process_fidelity(&chi, &ideal).unwrap() - 1.0).abs() < 1e-8);
        let reduced = process_fidelity(
            &reduced_logical_chi(&chi).unwrap(),
            &reduced_logical_chi(&ideal).unwrap(),
        )
        .unwrap();
        assert!((reduced - 1.0).abs() < 1e-8);
        for (rho, out) in inputs.iter().zip(&outputs) {
            let again = chi.apply(rho).unwrap();
            assert!((again.elements() - out.elements()).norm() < 1e-8);
        }
    }

    #[test]
    fn full_transfer_into_one_is_leakage() {
        let ops: Vec<CMatrix> = (0..3)
            .map(|j| {
                let mut k = CMatrix::zeros(3, 3);
                k[(1, j)] = Complex64::new(1.0, 0.0);
                k
            })
            .collect();
        let channel = KrausChannel::new(ops, true).unwrap();
        let inputs = process_tomography_inputs();
        let outputs: Vec<_> = inputs
            .iter()
            .map(|r| crate::channels::apply_channel(&channel, r, false).unwrap().0)
            .collect();
        let chi = process_tomography(&inputs, &outputs).unwrap();
        let reduced = reduced_logical_chi(&chi).unwrap();
        assert!(reduced.elements.norm() < 1e-8);
        assert!(reduced.leakage_dominated);
    }

    #[test]
    fn psd_projection_keeps_trace() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(0.7, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(-0.2, 0.0),
        ]));
        let p = project_psd(&m);
        assert!((p.trace().re - 1.0).abs() < 1e-12);
        assert!(hermitian_eigen(&p).0[0] >= -1e-12);
    }

    #[test]
    fn fidelity_edge_cases() {
        let s = FockSpace::new(3).expect("qutrit space");
        let zero = DensityMatrix::fock(&s, 0).unwrap();
        let two = DensityMatrix::fock(&s, 2).unwrap();
        let mixed = DensityMatrix::maximally_mixed(&s, &[0, 2]).unwrap();
        let plus = &process_tomography_inputs()[2];
        assert!((state_fidelity(&zero, &zero).unwrap() - 1.0).abs() < 1e-12);
        assert!(state_fidelity(&zero, &two).unwrap() < 1e-12);
        assert!((state_fidelity(plus, &mixed).unwrap() - 0.5).abs() < 1e-12);

        let a = chi_from_kraus(&KrausChannel::identity(3)).unwrap();
        assert!((process_fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let mut b = ChiMatrix::new(CMatrix::zeros(9, 9), ChiBasis::Qutrit9);
        b.elements[(1, 1)] = Complex64::new(1.0, 0.0);
        assert!(process_fidelity(&a, &b).unwrap() < 1e-12);
    }
}
