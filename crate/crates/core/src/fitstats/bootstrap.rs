use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::StreamKey;

/// Default resample count.
pub const DEFAULT_RESAMPLES: usize = 2000;

/// Percentile confidence interval for one statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub n_resamples: usize,
    /// Resamples on which the estimator failed and were left out.
    pub failures: usize,
    pub seed: u64,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Case-resampling bootstrap of a scalar statistic at 95% level.
pub fn bootstrap<T, F>(data: &[T], estimator: F, n_resamples: usize, seed: u64) -> Result<ConfidenceInterval>
where
    T: Clone + Sync,
    F: Fn(&[T]) -> Option<f64> + Sync,
{
    let cis = bootstrap_multi(data, |d| estimator(d).map(|v| vec![v]), n_resamples, seed, 0.95)?;
    Ok(cis[0])
}

/// Case-resampling bootstrap of a vector statistic. Resample `i` draws from
/// its own random stream, so the result does not depend on scheduling.
/// With a single resample the interval collapses to the point estimate.
pub fn bootstrap_multi<T, F>(
    data: &[T],
    estimator: F,
    n_resamples: usize,
    seed: u64,
    level: f64,
) -> Result<Vec<ConfidenceInterval>>
where
    T: Clone + Sync,
    F: Fn(&[T]) -> Option<Vec<f64>> + Sync,
{
    if data.is_empty() {
        return Err(Error::InsufficientData("bootstrap needs at least one row".into()));
    }
    if n_resamples == 0 {
        return Err(invalid("n_resamples", "must be > 0"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid("level", format!("must lie in (0, 1), got {level}")));
    }
    let estimate = estimator(data)
        .ok_or_else(|| Error::Numerical("estimator failed on the full data".into()))?;
    let k = estimate.len();
    let key = StreamKey::new(seed, "bootstrap");
    let draws: Vec<Option<Vec<f64>>> = (0..n_resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = key.stream(i as u64);
            let sample: Vec<T> = (0..data.len())
                .map(|_| data[rng.random_range(0..data.len())].clone())
                .collect();
            estimator(&sample).filter(|v| v.len() == k && v.iter().all(|x| x.is_finite()))
        })
        .collect();
    let ok: Vec<&Vec<f64>> = draws.iter().flatten().collect();
    let failures = n_resamples - ok.len();
    if ok.is_empty() {
        return Err(Error::Numerical("estimator failed on every resample".into()));
    }
    let tail = (1.0 - level) / 2.0;
    Ok((0..k)
        .map(|j| {
            let est = estimate[j];
            let (lower, upper) = if n_resamples == 1 {
                (est, est)
            } else {
                let mut values: Vec<f64> = ok.iter().map(|v| v[j]).collect();
                values.sort_by(f64::total_cmp);
                (
                    percentile(&values, tail).min(est),
                    percentile(&values, 1.0 - tail).max(est),
                )
            };
            ConfidenceInterval {
                estimate: est,
                lower,
                upper,
                level,
                n_resamples,
                failures,
                seed,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(d: &[f64]) -> Option<f64> {
        Some(d.iter().sum::<f64>() / d.len() as f64)
    }

    #[test]
    fn single_resample_is_degenerate() {
        let ci = bootstrap(&[1.0, 2.0, 4.0], mean, 1, 3).unwrap();
        assert_eq!((ci.lower, ci.upper), (ci.estimate, ci.estimate));
    }

    #[test]
    fn identical_rows_give_zero_width() {
        let ci = bootstrap(&[0.7; 50], mean, 200, 9).unwrap();
        assert_eq!(ci.lower, ci.upper);
        assert!((ci.lower - 0.7).abs() < 1e-12);
    }

    #[test]
    fn reproducible_under_seed() {
        let data: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let a = bootstrap(&data, mean, 500, 42).unwrap();
        let b = bootstrap(&data, mean, 500, 42).unwrap();
        assert_eq!(a, b);
        let c = bootstrap(&data, mean, 500, 43).unwrap();
        assert_ne!(a.lower, c.lower);
        assert!(a.lower <= a.estimate && a.estimate <= a.upper);
    }
}
