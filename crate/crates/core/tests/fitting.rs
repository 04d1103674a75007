use fock_erasure::erasure::{qutrit_rate_evolution, QutritRates};
use fock_erasure::fitstats::{
    bootstrap, fit_exponential, fit_rate_equations, levenberg_marquardt, FixedRates, LeastSquares,
    LmOptions,
};
use fock_erasure::rng::StreamKey;
use nalgebra::DVector;
use proptest::prelude::*;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

#[test]
fn bootstrap_interval_covers_the_true_mean() {
    let trials = 500;
    let key = StreamKey::new(2024, "coverage");
    let covered = (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = key.stream(i as u64);
            let data: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
            let ci = bootstrap(&data, |d| Some(d.iter().sum::<f64>() / d.len() as f64), 400, i as u64)
                .unwrap();
            ci.lower <= 0.0 && 0.0 <= ci.upper
        })
        .count();
    let rate = covered as f64 / trials as f64;
    // Binomial sd at 95% over 500 trials is about 1%.
    assert!((rate - 0.95).abs() < 0.04, "coverage {rate}");
}

#[test]
fn bootstrap_is_bit_reproducible() {
    let data: Vec<f64> = (0..300).map(|i| ((i * 7919) % 101) as f64).collect();
    let median = |d: &[f64]| {
        let mut v = d.to_vec();
        v.sort_by(f64::total_cmp);
        Some(v[v.len() / 2])
    };
    let a = bootstrap(&data, median, 1000, 8).unwrap();
    let b = bootstrap(&data, median, 1000, 8).unwrap();
    assert_eq!(a.lower.to_bits(), b.lower.to_bits());
    assert_eq!(a.upper.to_bits(), b.upper.to_bits());
}

#[test]
fn rate_equation_fit_under_one_percent_noise() {
    let rates = QutritRates::measured();
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut rng = StreamKey::new(3, "rate-noise").stream(0);
    let t: Vec<f64> = (0..200).map(|i| i as f64 * 7.5e-6).collect();
    let pops: Vec<[f64; 3]> = t
        .iter()
        .map(|&t| {
            let p = qutrit_rate_evolution(&rates, [0.0, 0.0, 1.0], t).unwrap();
            p.map(|x| x + noise.sample(&mut rng))
        })
        .collect();
    let fit = fit_rate_equations(&t, &pops, FixedRates::default()).unwrap();
    let g21 = fit.value("gamma_21").unwrap();
    let g12 = fit.value("gamma_12").unwrap();
    assert!((g21 / rates.gamma_21 - 1.0).abs() < 0.05, "gamma_21 {g21}");
    // gamma_12 barely moves the populations: its Cramer-Rao standard error on
    // this grid at 1% noise is about 0.4 gamma_12, so only a 3-sigma bound
    // is meaningful here.
    assert!((g12 - rates.gamma_12).abs() < 3.0 * 0.4 * rates.gamma_12, "gamma_12 {g12}");
}

struct Exponential {
    t: Vec<f64>,
    y: Vec<f64>,
}

impl LeastSquares for Exponential {
    fn n_params(&self) -> usize {
        3
    }
    fn scales(&self) -> Vec<f64> {
        vec![1.0; 3]
    }
    fn residuals(&self, p: &[f64]) -> Option<DVector<f64>> {
        Some(DVector::from_iterator(
            self.t.len(),
            self.t.iter().zip(&self.y).map(|(t, y)| p[0] * (-p[1] * t).exp() + p[2] - y),
        ))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn accepted_steps_never_raise_the_cost(
        a in 0.2f64..2.0, g in 0.1f64..5.0, b in -0.5f64..0.5,
        noise in prop::collection::vec(-0.05f64..0.05, 40),
        start in prop::collection::vec(0.1f64..3.0, 3),
    ) {
        let t: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let y = t.iter().zip(&noise).map(|(t, n)| a * (-g * t).exp() + b + n).collect();
        let problem = Exponential { t, y };
        let out = levenberg_marquardt(&problem, &start, &LmOptions::default()).unwrap();
        for w in out.cost_history.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        prop_assert!(out.cost >= 0.0);
    }

    #[test]
    fn exponential_fit_is_exact_on_model_data(
        a in 0.2f64..2.0, g in 100.0f64..5000.0, b in 0.0f64..0.5,
    ) {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 2e-5).collect();
        let y: Vec<f64> = t.iter().map(|t| a * (-g * t).exp() + b).collect();
        let fit = fit_exponential(&t, &y, None).unwrap();
        prop_assert!((fit.value("A").unwrap() / a - 1.0).abs() < 1e-6);
        prop_assert!((fit.value("gamma").unwrap() / g - 1.0).abs() < 1e-6);
        prop_assert!((fit.value("B").unwrap() - b).abs() < 1e-6);
        for p in &fit.params {
            if let Some([lo, hi]) = p.ci {
                prop_assert!(lo <= p.value && p.value <= hi);
            }
        }
    }
}
