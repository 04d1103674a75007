use std::f64::consts::{E, FRAC_1_SQRT_2, SQRT_2};
use std::io::Read;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbert::{displaced_parity, CMatrix, DensityMatrix, FockSpace, WIGNER_SCALE};

/// Smallest cutoff used when evaluating displaced parities.
pub const PARITY_CUTOFF_FLOOR: usize = 30;

/// One measured displaced-parity point.
///
/// `parity_expectation` is `<P(alpha)>`, not `W(alpha)`; divide a Wigner value
/// by `2/pi` before building a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WignerSample {
    pub alpha: Complex64,
    pub parity_expectation: f64,
    pub shots: u64,
}

impl WignerSample {
    pub fn new(alpha: Complex64, parity_expectation: f64, shots: u64) -> Result<Self> {
        if !(parity_expectation.abs() <= 1.0 + 1e-9) {
            return Err(invalid(
                "parity_expectation",
                format!("must lie in [-1, 1], got {parity_expectation}"),
            ));
        }
        Ok(Self {
            alpha,
            parity_expectation,
            shots,
        })
    }
}

fn cutoff_for(alpha: Complex64, dim: usize) -> FockSpace {
    FockSpace::for_displacement(alpha, PARITY_CUTOFF_FLOOR.max(dim))
}

/// `<P(alpha)>` of `rho`, evaluated after zero-padding to a cutoff that keeps
/// the displacement unitary.
pub fn parity_expectation(rho: &DensityMatrix, alpha: Complex64) -> f64 {
    let space = cutoff_for(alpha, rho.dim());
    let big = rho.resized(space.dim());
    let p = displaced_parity(alpha, &space);
    (big.elements() * p).trace().re
}

/// `W(alpha) = (2/pi) Tr[rho P(alpha)]`.
pub fn wigner(rho: &DensityMatrix, alpha: Complex64) -> f64 {
    WIGNER_SCALE * parity_expectation(rho, alpha)
}

/// `P(alpha)` restricted to the span of the given Fock levels.
pub fn projected_parity(alpha: Complex64, levels: &[usize]) -> CMatrix {
    let top = levels.iter().copied().max().unwrap_or(0) + 1;
    let space = cutoff_for(alpha, top);
    let p = displaced_parity(alpha, &space);
    CMatrix::from_fn(levels.len(), levels.len(), |i, j| p[(levels[i], levels[j])])
}

fn quarter() -> f64 {
    1.0 / (4.0 * SQRT_2).sqrt()
}

/// Displacements for the logical Pauli extraction, in the order
/// `0, 1, (1-i)s, (1+i)s, 1/sqrt(2)` with `s = 1/sqrt(4 sqrt 2)`.
pub fn five_point_alphas() -> [Complex64; 5] {
    let s = quarter();
    [
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(s, -s),
        Complex64::new(s, s),
        Complex64::new(FRAC_1_SQRT_2, 0.0),
    ]
}

/// Displacements for qutrit reconstruction on `{|0>, |1>, |2>}`.
pub fn eight_point_alphas() -> [Complex64; 8] {
    let s = quarter();
    let h = FRAC_1_SQRT_2;
    [
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(h, 0.0),
        Complex64::new(-h, 0.0),
        Complex64::new(0.0, h),
        Complex64::new(0.0, -h),
        Complex64::new(s, s),
        Complex64::new(s, -s),
    ]
}

/// Expectation values of the logical Paulis on `{|0>, |2>}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogicalPaulis {
    pub i: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl LogicalPaulis {
    /// Linear-inversion estimate `sum_O <O>/2 O` in the basis `(|0>, |2>)`;
    /// not necessarily positive.
    pub fn density(&self) -> CMatrix {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        CMatrix::from_row_slice(
            2,
            2,
            &[
                c((self.i + self.z) / 2.0, 0.0),
                c(self.x / 2.0, -self.y / 2.0),
                c(self.x / 2.0, self.y / 2.0),
                c((self.i - self.z) / 2.0, 0.0),
            ],
        )
    }
}

/// Logical Paulis from the five displaced-parity values, given in the order
/// of [`five_point_alphas`].
pub fn logical_paulis_from_parity(p: [f64; 5]) -> LogicalPaulis {
    let x = (E * E * p[1] - p[0]) / (2.0 * SQRT_2);
    LogicalPaulis {
        i: p[0],
        x,
        y: -(FRAC_1_SQRT_2.exp() / 2.0) * (p[2] - p[3]),
        z: E * p[4] - SQRT_2 * x,
    }
}

/// Exact parities of `rho` at each displacement, tagged with `shots`.
pub fn ideal_samples(rho: &DensityMatrix, alphas: &[Complex64], shots: u64) -> Vec<WignerSample> {
    alphas
        .iter()
        .map(|&alpha| WignerSample {
            alpha,
            parity_expectation: parity_expectation(rho, alpha).clamp(-1.0, 1.0),
            shots,
        })
        .collect()
}

/// Finite-shot parity estimates: each shot reads `+1` with probability
/// `(1 + <P>)/2`.
pub fn sampled_parities<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    alphas: &[Complex64],
    shots: u64,
    rng: &mut R,
) -> Result<Vec<WignerSample>> {
    if shots == 0 {
        return Err(invalid("shots", "must be > 0"));
    }
    alphas
        .iter()
        .map(|&alpha| {
            let p = parity_expectation(rho, alpha).clamp(-1.0, 1.0);
            let dist = Binomial::new(shots, (1.0 + p) / 2.0)
                .map_err(|e| Error::Numerical(e.to_string()))?;
            let plus = dist.sample(rng) as f64;
            Ok(WignerSample {
                alpha,
                parity_expectation: 2.0 * plus / shots as f64 - 1.0,
                shots,
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct SampleRow {
    re_alpha: f64,
    im_alpha: f64,
    parity_expectation: f64,
    shots: u64,
}

/// Reads samples from CSV with columns `re_alpha, im_alpha, parity_expectation, shots`.
pub fn read_wigner_samples_csv<R: Read>(reader: R) -> Result<Vec<WignerSample>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize::<SampleRow>()
        .map(|row| {
            let row = row.map_err(|e| invalid("samples", e.to_string()))?;
            WignerSample::new(
                Complex64::new(row.re_alpha, row.im_alpha),
                row.parity_expectation,
                row.shots,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Ket;
    use std::f64::consts::PI;

    #[test]
    fn wigner_reference_values() {
        let s = FockSpace::new(4).unwrap();
        let vac = DensityMatrix::fock(&s, 0).unwrap();
        let one = DensityMatrix::fock(&s, 1).unwrap();
        assert!((wigner(&vac, Complex64::new(0.0, 0.0)) - 2.0 / PI).abs() < 1e-12);
        assert!((wigner(&one, Complex64::new(0.0, 0.0)) + 2.0 / PI).abs() < 1e-12);
        let w = wigner(&vac, Complex64::new(0.6, 0.8));
        assert!((w - 2.0 / PI * (-2.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn point_sets() {
        let five = five_point_alphas();
        assert_eq!(five[2], five[3].conj());
        let eight = eight_point_alphas();
        for a in five {
            assert!(eight.iter().any(|b| (a - b).norm() < 1e-15));
        }
    }

    #[test]
    fn csv_round_trip() {
        let text = "re_alpha,im_alpha,parity_expectation,shots\n0.0,0.0,0.5,100\n1.0,-0.5,-0.25,100\n";
        let samples = read_wigner_samples_csv(text.as_bytes()).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[1].alpha, Complex64::new(1.0, -0.5));
        let bad = "re_alpha,im_alpha,parity_expectation,shots\n0,0,1.5,1\n";
        assert!(read_wigner_samples_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn zero_parities_give_zero_paulis() {
        let p = logical_paulis_from_parity([0.0; 5]);
        assert_eq!((p.i, p.x, p.y, p.z), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn plus_y_convention() {
        let s = FockSpace::new(3).unwrap();
        let h = FRAC_1_SQRT_2;
        let plus_y = Ket::superposition(&s, &[(0, h.into()), (2, Complex64::new(0.0, h))])
            .unwrap()
            .to_density();
        let p: Vec<f64> = five_point_alphas().iter().map(|&a| parity_expectation(&plus_y, a)).collect();
        let paulis = logical_paulis_from_parity([p[0], p[1], p[2], p[3], p[4]]);
        assert!((paulis.y - 1.0).abs() < 1e-6);
    }
}
