use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

/// A nonlinear least-squares problem `min_p |r(p)|^2`.
pub trait LeastSquares {
    fn n_params(&self) -> usize;

    /// Residual vector, or `None` where the model is undefined.
    fn residuals(&self, p: &[f64]) -> Option<DVector<f64>>;

    /// Typical magnitude of each parameter, used for finite-difference steps
    /// when the parameter itself is near zero.
    fn scales(&self) -> Vec<f64>;

    /// Analytic Jacobian; the default is central differences.
    fn jacobian(&self, p: &[f64]) -> Option<DMatrix<f64>> {
        numerical_jacobian(self, p)
    }
}

/// Central-difference Jacobian with step `1e-6 * max(|p_i|, scale_i)`.
pub fn numerical_jacobian<P: LeastSquares + ?Sized>(problem: &P, p: &[f64]) -> Option<DMatrix<f64>> {
    let scales = problem.scales();
    let mut columns = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let h = 1e-6 * p[i].abs().max(scales[i]);
        let mut hi = p.to_vec();
        let mut lo = p.to_vec();
        hi[i] += h;
        lo[i] -= h;
        let diff = (problem.residuals(&hi)? - problem.residuals(&lo)?) / (2.0 * h);
        columns.push(diff);
    }
    Some(DMatrix::from_columns(&columns))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub cost_tolerance: f64,
    /// Stop when every step component is below this fraction of its scale.
    pub step_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            cost_tolerance: 1e-15,
            step_tolerance: 1e-13,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// `|r|^2` at `params`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub jacobian: DMatrix<f64>,
    /// Cost after each accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
    pub n_residuals: usize,
}

impl LmOutcome {
    /// `s^2 (J^T J)^{-1}` with `s^2 = cost / (n - k)`; `None` when singular
    /// or without spare degrees of freedom.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        let k = self.params.len();
        if self.n_residuals <= k {
            return None;
        }
        let s2 = self.cost / (self.n_residuals - k) as f64;
        let jtj = self.jacobian.transpose() * &self.jacobian;
        jtj.try_inverse().map(|inv| inv * s2)
    }

    /// True when some parameter direction leaves the residuals unchanged:
    /// a zero Jacobian column, or a column-normalized `J^T J` with condition
    /// number above 1e12.
    pub fn is_degenerate(&self) -> bool {
        let norms: Vec<f64> = self.jacobian.column_iter().map(|c| c.norm()).collect();
        let max = norms.iter().copied().fold(0.0, f64::max);
        if max == 0.0 || norms.iter().any(|&n| n <= 1e-12 * max) {
            return true;
        }
        let mut scaled = self.jacobian.clone();
        for (j, n) in norms.iter().enumerate() {
            scaled.column_mut(j).unscale_mut(*n);
        }
        let sv = scaled.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        smin <= 1e-6 * smax
    }
}

/// Levenberg-Marquardt with Marquardt diagonal scaling. Steps that raise the
/// cost are rejected, so the accepted cost sequence is non-increasing.
pub fn levenberg_marquardt<P: LeastSquares + ?Sized>(
    problem: &P,
    p0: &[f64],
    options: &LmOptions,
) -> Result<LmOutcome> {
    if p0.len() != problem.n_params() {
        return Err(invalid("p0", "length does not match the parameter count"));
    }
    let scales = problem.scales();
    let mut p = p0.to_vec();
    let mut r = problem
        .residuals(&p)
        .ok_or_else(|| invalid("p0", "model undefined at the initial guess"))?;
    let mut cost = r.norm_squared();
    let mut jac = problem
        .jacobian(&p)
        .ok_or_else(|| invalid("p0", "Jacobian undefined at the initial guess"))?;
    let mut history = vec![cost];
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = cost == 0.0;
    while !converged && iterations < options.max_iterations {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let diag: Vec<f64> = (0..p.len()).map(|i| jtj[(i, i)].max(1e-300)).collect();
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for (i, d) in diag.iter().enumerate() {
                a[(i, i)] += lambda * d;
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, s)| x + s).collect();
            let small_step = step
                .iter()
                .zip(&p)
                .zip(&scales)
                .all(|((s, x), sc)| s.abs() <= options.step_tolerance * x.abs().max(*sc));
            match problem.residuals(&trial) {
                Some(rt) if rt.norm_squared() <= cost => {
                    let new_cost = rt.norm_squared();
                    let reduction = (cost - new_cost) / cost.max(f64::MIN_POSITIVE);
                    p = trial;
                    r = rt;
                    cost = new_cost;
                    history.push(cost);
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if reduction < options.cost_tolerance || small_step || cost == 0.0 {
                        converged = true;
                    }
                    break;
                }
                _ => {
                    if small_step {
                        converged = true;
                        break;
                    }
                    lambda *= 10.0;
                }
            }
        }
        if converged && !accepted {
            break;
        }
        if !accepted {
            // Damping saturated without progress: at a minimum to working
            // precision if the gradient is negligible.
            converged = g.norm() <= 1e-10 * (jac.norm() * r.norm()).max(f64::MIN_POSITIVE);
            break;
        }
        jac = match problem.jacobian(&p) {
            Some(j) => j,
            None => break,
        };
    }
    Ok(LmOutcome {
        params: p,
        cost,
        iterations,
        converged,
        jacobian: jac,
        cost_history: history,
        n_residuals: r.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosen;

    impl LeastSquares for Rosen {
        fn n_params(&self) -> usize {
            2
        }
        fn residuals(&self, p: &[f64]) -> Option<DVector<f64>> {
            Some(DVector::from_vec(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]]))
        }
        fn scales(&self) -> Vec<f64> {
            vec![1.0, 1.0]
        }
    }

    #[test]
    fn solves_rosenbrock() {
        let out = levenberg_marquardt(&Rosen, &[-1.2, 1.0], &LmOptions::default()).unwrap();
        assert!(out.converged);
        assert!((out.params[0] - 1.0).abs() < 1e-9 && (out.params[1] - 1.0).abs() < 1e-9);
        assert!(out.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn numerical_jacobian_is_accurate() {
        let j = numerical_jacobian(&Rosen, &[0.3, -0.4]).unwrap();
        let exact = DMatrix::from_row_slice(2, 2, &[-6.0, 10.0, -1.0, 0.0]);
        assert!((j - exact).norm() < 1e-6);
    }
}
