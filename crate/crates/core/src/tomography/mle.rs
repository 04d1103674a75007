use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbert::{CMatrix, DensityMatrix};

use super::wigner::{projected_parity, WignerSample};

/// Residual weighting used by [`mle_state_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MleCost {
    /// Plain squared residuals.
    #[default]
    LeastSquares,
    /// Residuals weighted by the inverse binomial variance of each point.
    ShotWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub cost: MleCost,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            cost: MleCost::LeastSquares,
            max_iterations: 10_000,
            gradient_tolerance: 1e-10,
        }
    }
}

/// Reconstructed state, always embedded in `{|0>, |1>, |2>}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub state: DensityMatrix,
    /// Fock levels the fit was restricted to.
    pub levels: Vec<usize>,
    pub cost: f64,
    pub iterations: usize,
    /// False when the iteration cap or a stalled line search ended the fit
    /// before the gradient tolerance was met; `state` is then the best iterate.
    pub converged: bool,
}

/// Fock levels spanned by a reconstruction of the given dimension.
pub fn subspace_levels(subspace_dim: usize) -> Result<Vec<usize>> {
    match subspace_dim {
        2 => Ok(vec![0, 2]),
        3 => Ok(vec![0, 1, 2]),
        d => Err(invalid("subspace_dim", format!("must be 2 or 3, got {d}"))),
    }
}

struct Problem {
    d: usize,
    ops: Vec<CMatrix>,
    targets: Vec<f64>,
    weights: Vec<f64>,
}

impl Problem {
    /// Parameters: `d` real diagonal entries, then real and imaginary parts of
    /// the strictly lower triangle, row by row.
    fn unpack(&self, x: &DVector<f64>) -> CMatrix {
        let d = self.d;
        let mut t = CMatrix::zeros(d, d);
        for i in 0..d {
            t[(i, i)] = Complex64::new(x[i], 0.0);
        }
        let mut k = d;
        for i in 0..d {
            for j in 0..i {
                t[(i, j)] = Complex64::new(x[k], x[k + 1]);
                k += 2;
            }
        }
        t
    }

    fn density(&self, t: &CMatrix) -> (CMatrix, f64) {
        let a = t * t.adjoint();
        let tr = a.trace().re;
        (a.unscale(tr), tr)
    }

    fn cost(&self, x: &DVector<f64>) -> f64 {
        let (rho, _) = self.density(&self.unpack(x));
        self.ops
            .iter()
            .zip(&self.targets)
            .zip(&self.weights)
            .map(|((m, p), w)| w * ((&rho * m).trace().re - p).powi(2))
            .sum()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let d = self.d;
        let t = self.unpack(x);
        let (rho, tr) = self.density(&t);
        let mut g = CMatrix::zeros(d, d);
        for ((m, p), w) in self.ops.iter().zip(&self.targets).zip(&self.weights) {
            let r = (&rho * m).trace().re - p;
            g += m.scale(2.0 * w * r);
        }
        let shift = (&g * &rho).trace().re;
        for i in 0..d {
            g[(i, i)] -= Complex64::new(shift, 0.0);
        }
        let xm = (g * t).unscale(tr);
        let mut out = DVector::zeros(x.len());
        for i in 0..d {
            out[i] = 2.0 * xm[(i, i)].re;
        }
        let mut k = d;
        for i in 0..d {
            for j in 0..i {
                out[k] = 2.0 * xm[(i, j)].re;
                out[k + 1] = 2.0 * xm[(i, j)].im;
                k += 2;
            }
        }
        out
    }
}

/// Least-squares state reconstruction with the default options.
pub fn mle_state(samples: &[WignerSample], subspace_dim: usize) -> Result<MleResult> {
    mle_state_with(samples, subspace_dim, &MleOptions::default())
}

/// Fits `rho = T T† / Tr(T T†)` with lower-triangular `T` to the measured
/// parities by BFGS with Armijo backtracking, starting from the maximally
/// mixed state.
pub fn mle_state_with(
    samples: &[WignerSample],
    subspace_dim: usize,
    options: &MleOptions,
) -> Result<MleResult> {
    let levels = subspace_levels(subspace_dim)?;
    let d = levels.len();
    if samples.len() < d * d - 1 {
        return Err(Error::InsufficientData(format!(
            "{} samples for a {d}-level reconstruction, need at least {}",
            samples.len(),
            d * d - 1
        )));
    }
    if options.max_iterations == 0 || !(options.gradient_tolerance > 0.0) {
        return Err(invalid("options", "iteration cap and tolerance must be positive"));
    }
    let weights = samples
        .iter()
        .map(|s| match options.cost {
            MleCost::LeastSquares => 1.0,
            MleCost::ShotWeighted => {
                let n = s.shots.max(1) as f64;
                n / (1.0 - s.parity_expectation.powi(2)).max(1.0 / n)
            }
        })
        .collect();
    let problem = Problem {
        d,
        ops: samples.iter().map(|s| projected_parity(s.alpha, &levels)).collect(),
        targets: samples.iter().map(|s| s.parity_expectation).collect(),
        weights,
    };

    let n = d * d;
    let mut x = DVector::zeros(n);
    for i in 0..d {
        x[i] = 1.0 / (d as f64).sqrt();
    }
    let mut f = problem.cost(&x);
    let mut g = problem.gradient(&x);
    let mut h = nalgebra::DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iterations {
        if g.norm() < options.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut p = -(&h * &g);
        let mut slope = g.dot(&p);
        if slope >= 0.0 {
            h.fill_with_identity();
            p = -g.clone();
            slope = g.dot(&p);
        }
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-20 {
            let trial = &x + &p * step;
            let ft = problem.cost(&trial);
            if ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            break;
        };
        let g_new = problem.gradient(&x_new);
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            h += (&s * s.transpose()) * ((sy + yhy) / (sy * sy))
                - (&hy * s.transpose() + &s * hy.transpose()) / sy;
        }
        x = x_new;
        f = f_new;
        g = g_new;
    }
    if !converged && g.norm() < options.gradient_tolerance {
        converged = true;
    }
    if !converged {
        log::warn!(
            "state reconstruction stopped after {iterations} iterations, gradient norm {:.3e}",
            g.norm()
        );
    }

    let (rho, _) = problem.density(&problem.unpack(&x));
    let mut full = CMatrix::zeros(3, 3);
    for (i, &a) in levels.iter().enumerate() {
        for (j, &b) in levels.iter().enumerate() {
            full[(a, b)] = rho[(i, j)];
        }
    }
    let full = (&full + full.adjoint()).scale(0.5);
    Ok(MleResult {
        state: DensityMatrix::from_matrix(full)?,
        levels,
        cost: f,
        iterations,
        converged,
    })
}
