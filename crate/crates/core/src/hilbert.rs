//! Truncated Fock-space linear algebra.
//!
//! Operators are dense `dim x dim` complex matrices in the number basis
//! `|0>, |1>, ..., |dim-1>`. Everything here is a pure function of its
//! inputs.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

static DEFAULT_TOLERANCE_BITS: AtomicU64 = AtomicU64::new(1e-10_f64.to_bits());

/// Absolute tolerance used for complex comparisons unless a call states otherwise.
pub fn default_tolerance() -> f64 {
    f64::from_bits(DEFAULT_TOLERANCE_BITS.load(Ordering::Relaxed))
}

/// Overrides the process-wide default tolerance.
pub fn set_default_tolerance(tol: f64) -> Result<()> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(invalid("tolerance", format!("must be positive, got {tol}")));
    }
    DEFAULT_TOLERANCE_BITS.store(tol.to_bits(), Ordering::Relaxed);
    Ok(())
}

/// Photon-number truncation of a single bosonic mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FockSpace {
    dim: usize,
}

impl FockSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(invalid("dim", format!("Fock truncation must be >= 2, got {dim}")));
        }
        Ok(Self { dim })
    }

    /// Smallest truncation at which `displacement(alpha)` stays within 1e-8 of the
    /// untruncated operator on the low-lying levels, never below `floor`.
    pub fn for_displacement(alpha: Complex64, floor: usize) -> Self {
        let needed = (8.0 * alpha.norm_sqr() + 12.0).ceil() as usize;
        Self {
            dim: needed.max(floor).max(2),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn identity(&self) -> CMatrix {
        CMatrix::identity(self.dim, self.dim)
    }

    pub fn zeros(&self) -> CMatrix {
        CMatrix::zeros(self.dim, self.dim)
    }
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Largest elementwise deviation from Hermiticity.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && hermiticity_error(m) <= tol
}

/// Largest elementwise deviation of `m` from the identity.
pub fn identity_error(m: &CMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((m[(i, j)] - target).norm());
        }
    }
    worst
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = m.nrows();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_map(m: &CMatrix, f: impl Fn(f64) -> Complex64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let diag = CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&v| f(v)),
    ));
    &vectors * diag * vectors.adjoint()
}

/// Spectral norm of a Hermitian matrix (largest absolute eigenvalue).
pub fn hermitian_norm(m: &CMatrix) -> f64 {
    let (values, _) = hermitian_eigen(m);
    values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Largest singular value of an arbitrary matrix.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    hermitian_norm(&(m.adjoint() * m)).sqrt()
}

/// Lowering operator: entry `(n-1, n) = sqrt(n)`.
pub fn annihilation(space: &FockSpace) -> CMatrix {
    let mut a = space.zeros();
    for n in 1..space.dim() {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    a
}

pub fn creation(space: &FockSpace) -> CMatrix {
    annihilation(space).adjoint()
}

pub fn number_operator(space: &FockSpace) -> CMatrix {
    diagonal(space, |n| n as f64)
}

/// `(-1)^(a†a)`.
pub fn parity_operator(space: &FockSpace) -> CMatrix {
    diagonal(space, |n| if n % 2 == 0 { 1.0 } else { -1.0 })
}

pub fn projector(space: &FockSpace, levels: &[usize]) -> CMatrix {
    let mut p = space.zeros();
    for &n in levels {
        if n < space.dim() {
            p[(n, n)] = ONE;
        }
    }
    p
}

pub fn diagonal(space: &FockSpace, f: impl Fn(usize) -> f64) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        space.dim(),
        (0..space.dim()).map(|n| Complex64::new(f(n), 0.0)),
    ))
}

/// `exp(alpha a† - alpha* a)`, computed from the spectrum of the Hermitian
/// generator `i(alpha a† - alpha* a)`.
///
/// Logs a warning when the truncation distorts the coherent state `D|0>` by
/// more than 1e-8; see [`displacement_truncation_error`].
pub fn displacement(alpha: Complex64, space: &FockSpace) -> CMatrix {
    let d = displacement_quiet(alpha, space);
    let err = coherent_column_error(&d, alpha);
    if err > 1e-8 {
        log::warn!(
            "displacement |alpha| = {:.3} truncated at dim {}: coherent-state error {:.2e}",
            alpha.norm(),
            space.dim(),
            err
        );
    }
    d
}

/// Max deviation of `D(alpha)|0>` from the analytic coherent-state amplitudes.
///
/// The exponential of the truncated anti-Hermitian generator is exactly unitary,
/// so this is the quantity that actually measures truncation damage.
pub fn displacement_truncation_error(alpha: Complex64, space: &FockSpace) -> f64 {
    coherent_column_error(&displacement_quiet(alpha, space), alpha)
}

fn displacement_quiet(alpha: Complex64, space: &FockSpace) -> CMatrix {
    if alpha == ZERO {
        return space.identity();
    }
    let a = annihilation(space);
    let generator = a.adjoint() * alpha - &a * alpha.conj();
    hermitian_map(&(&generator * Complex64::i()), |lambda| {
        Complex64::from_polar(1.0, -lambda)
    })
}

fn coherent_column_error(d: &CMatrix, alpha: Complex64) -> f64 {
    let mut amp = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    let mut worst = 0.0_f64;
    for n in 0..d.nrows() {
        if n > 0 {
            amp *= alpha / (n as f64).sqrt();
        }
        worst = worst.max((d[(n, 0)] - amp).norm());
    }
    worst
}

/// `D(alpha) Π D(-alpha)`.
pub fn displaced_parity(alpha: Complex64, space: &FockSpace) -> CMatrix {
    let d = displacement(alpha, space);
    let p = &d * parity_operator(space) * d.adjoint();
    (&p + p.adjoint()).scale(0.5)
}

/// Normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amplitudes: CVector,
}

impl Ket {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidState("ket has zero or non-finite norm".into()));
        }
        Ok(Self {
            amplitudes: amplitudes.unscale(norm),
        })
    }

    pub fn fock(space: &FockSpace, n: usize) -> Result<Self> {
        Self::superposition(space, &[(n, ONE)])
    }

    /// Normalized `sum_k c_k |n_k>`.
    pub fn superposition(space: &FockSpace, terms: &[(usize, Complex64)]) -> Result<Self> {
        let mut v = CVector::zeros(space.dim());
        for &(n, c) in terms {
            if n >= space.dim() {
                return Err(invalid(
                    "fock level",
                    format!("level {n} outside truncation {}", space.dim()),
                ));
            }
            v[n] += c;
        }
        Self::new(v)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            elements: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }
}

/// Density operator over a truncated Fock space.
///
/// Always Hermitian and positive semidefinite; the trace may be below one for
/// post-selected (unnormalized) branches.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    elements: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity (1e-10) and positivity (min eigenvalue >= -1e-9).
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidState("density matrix must be square".into()));
        }
        let herm = hermiticity_error(&m);
        if herm > 1e-10 {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {herm:.2e})"
            )));
        }
        let (values, _) = hermitian_eigen(&m);
        if values[0] < -1e-9 {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {:.3e}",
                values[0]
            )));
        }
        Ok(Self { elements: m })
    }

    /// Wraps a matrix that is known to be a valid state by construction; only
    /// symmetrizes away rounding noise.
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        let sym = (&m + m.adjoint()).scale(0.5);
        Self { elements: sym }
    }

    pub fn fock(space: &FockSpace, n: usize) -> Result<Self> {
        Ok(Ket::fock(space, n)?.to_density())
    }

    /// Uniform mixture over the given Fock levels.
    pub fn maximally_mixed(space: &FockSpace, levels: &[usize]) -> Result<Self> {
        if levels.is_empty() || levels.iter().any(|&n| n >= space.dim()) {
            return Err(invalid("levels", "empty or outside the truncation"));
        }
        let p = projector(space, levels);
        Ok(Self {
            elements: p.unscale(levels.len() as f64),
        })
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn space(&self) -> FockSpace {
        FockSpace {
            dim: self.dim().max(2),
        }
    }

    pub fn elements(&self) -> &CMatrix {
        &self.elements
    }

    pub fn into_matrix(self) -> CMatrix {
        self.elements
    }

    pub fn trace(&self) -> f64 {
        self.elements.trace().re
    }

    pub fn population(&self, n: usize) -> f64 {
        if n < self.dim() {
            self.elements[(n, n)].re
        } else {
            0.0
        }
    }

    pub fn element(&self, m: usize, n: usize) -> Complex64 {
        if m < self.dim() && n < self.dim() {
            self.elements[(m, n)]
        } else {
            ZERO
        }
    }

    /// `Tr(rho O)`.
    pub fn expectation(&self, op: &CMatrix) -> Result<Complex64> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: op.nrows(),
            });
        }
        Ok((&self.elements * op).trace())
    }

    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if !(tr > 0.0) {
            return Err(Error::InvalidState(format!("cannot normalize trace {tr:e}")));
        }
        Ok(Self {
            elements: self.elements.unscale(tr),
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            elements: self.elements.scale(factor),
        }
    }

    /// Zero-pads (or truncates) to a new Fock cutoff.
    pub fn resized(&self, dim: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        let k = dim.min(self.dim());
        m.view_mut((0, 0), (k, k))
            .copy_from(&self.elements.view((0, 0), (k, k)));
        Self { elements: m }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.elements).0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Checks the density-matrix invariants: Hermitian within 1e-10, unit trace
    /// within 1e-10 and eigenvalues >= -1e-9.
    pub fn check_physical(&self) -> Result<()> {
        let herm = hermiticity_error(&self.elements);
        if herm > 1e-10 {
            return Err(Error::InvalidState(format!("Hermiticity error {herm:.2e}")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -1e-9 {
            return Err(Error::InvalidState(format!("eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    /// Conjugation `U rho U†`.
    pub fn transformed(&self, u: &CMatrix) -> Self {
        Self::from_matrix_unchecked(u * &self.elements * u.adjoint())
    }
}

/// `W(alpha)` normalization: `W = (2/pi) <P(alpha)>`.
pub const WIGNER_SCALE: f64 = 2.0 / PI;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rejects_tiny_space() {
        assert!(FockSpace::new(1).is_err());
        assert!(FockSpace::new(2).is_ok());
    }

    #[test]
    fn annihilation_lowers_fock_states() {
        let s = FockSpace::new(4).unwrap();
        let a = annihilation(&s);
        let two = Ket::fock(&s, 2).unwrap();
        let out = &a * two.amplitudes();
        assert_abs_diff_eq!(out[1].re, 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(out.norm(), 2f64.sqrt(), epsilon = 1e-15);
        let vac = Ket::fock(&s, 0).unwrap();
        assert_eq!((&a * vac.amplitudes()).norm(), 0.0);
    }

    #[test]
    fn commutator_is_identity_below_cutoff() {
        let s = FockSpace::new(6).unwrap();
        let a = annihilation(&s);
        let comm = commutator(&a, &creation(&s));
        let block = comm.view((0, 0), (5, 5)).into_owned();
        assert!(identity_error(&block) < 1e-14);
        // The top level carries the truncation artefact -(dim-1).
        assert_abs_diff_eq!(comm[(5, 5)].re, -5.0, epsilon = 1e-14);
    }

    #[test]
    fn parity_values_and_square() {
        let s = FockSpace::new(4).unwrap();
        let p = parity_operator(&s);
        let d: Vec<f64> = (0..4).map(|n| p[(n, n)].re).collect();
        assert_eq!(d, vec![1.0, -1.0, 1.0, -1.0]);
        assert_eq!(&p * &p, s.identity());
        let two = DensityMatrix::fock(&s, 2).unwrap();
        assert_eq!(two.expectation(&p).unwrap().re, 1.0);
        let plus = Ket::superposition(&s, &[(0, ONE), (1, ONE)]).unwrap().to_density();
        assert_abs_diff_eq!(plus.expectation(&p).unwrap().re, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn displacement_identity_and_inverse() {
        let s = FockSpace::new(30).unwrap();
        assert_eq!(displacement(ZERO, &s), s.identity());
        let alpha = Complex64::from_polar(1.0, 0.7);
        let prod = displacement(alpha, &s) * displacement(-alpha, &s);
        assert!(identity_error(&prod) < 1e-10);
    }

    #[test]
    fn displacement_vacuum_overlap() {
        let s = FockSpace::new(30).unwrap();
        for phase in [0.0, 0.4, 2.0] {
            let d = displacement(Complex64::from_polar(1.0, phase), &s);
            assert_abs_diff_eq!(d[(0, 0)].re, (-0.5f64).exp(), epsilon = 1e-10);
            assert_abs_diff_eq!(d[(0, 0)].im, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn displaced_parity_of_vacuum() {
        let s = FockSpace::new(30).unwrap();
        assert_eq!(displaced_parity(ZERO, &s), parity_operator(&s));
        let vac = DensityMatrix::fock(&s, 0).unwrap();
        let v = vac.expectation(&displaced_parity(c(1.0, 0.0), &s)).unwrap();
        assert_abs_diff_eq!(v.re, (-2.0f64).exp(), epsilon = 1e-8);
    }

    #[test]
    fn density_matrix_validation() {
        let s = FockSpace::new(3).unwrap();
        let mut m = s.zeros();
        m[(0, 0)] = c(1.2, 0.0);
        m[(1, 1)] = c(-0.2, 0.0);
        assert!(DensityMatrix::from_matrix(m).is_err());
        let mut m = s.zeros();
        m[(0, 1)] = c(0.1, 0.0);
        assert!(DensityMatrix::from_matrix(m).is_err());
        let mixed = DensityMatrix::maximally_mixed(&s, &[0, 2]).unwrap();
        mixed.check_physical().unwrap();
    }

    #[test]
    fn tolerance_knob_round_trips() {
        let before = default_tolerance();
        assert_eq!(before, 1e-10);
        assert!(set_default_tolerance(-1.0).is_err());
    }

    proptest! {
        #[test]
        fn displaced_parity_is_hermitian_and_bounded(r in 0.0f64..1.5, phi in 0.0f64..6.3) {
            let alpha = Complex64::from_polar(r, phi);
            let s = FockSpace::for_displacement(alpha, 30);
            let p = displaced_parity(alpha, &s);
            prop_assert!(hermiticity_error(&p) < 1e-12);
            let (values, _) = hermitian_eigen(&p);
            prop_assert!(values[0] >= -1.0 - 1e-8);
            prop_assert!(values[values.len() - 1] <= 1.0 + 1e-8);
        }

        #[test]
        fn displacement_unitary_at_recommended_cutoff(r in 0.0f64..1.5, phi in 0.0f64..6.3) {
            let alpha = Complex64::from_polar(r, phi);
            let s = FockSpace::for_displacement(alpha, 2);
            let d = displacement(alpha, &s);
            prop_assert!(identity_error(&(d.adjoint() * &d)) < 1e-8);
            prop_assert!(displacement_truncation_error(alpha, &s) < 1e-8);
        }

        #[test]
        fn random_states_have_unit_spectrum(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let s = FockSpace::new(5).unwrap();
            let g = CMatrix::from_fn(5, 5, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let rho = DensityMatrix::from_matrix(&g * g.adjoint()).unwrap().normalized().unwrap();
            let sum: f64 = rho.eigenvalues().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-10);
            prop_assert!(rho.min_eigenvalue() >= -1e-9);
            prop_assert_eq!(rho.dim(), s.dim());
        }
    }
}
