use fock_erasure::channels::{
    lindblad_evolve, lindblad_evolve_exact, photon_loss_kraus, thermal_loss_collapse_ops,
    LindbladSpec,
};
use fock_erasure::erasure::{
    analytic_p1l_cycles, qutrit_rate_evolution, simulate_cpmg, simulate_ramsey,
    simulate_relaxation, CycleChannel, ErasureQubitConfig, Protocol, QutritRates,
};
use fock_erasure::hilbert::{identity_error, DensityMatrix, FockSpace, Ket};
use fock_erasure::measure::{
    assignment_metrics, parity_measure, simulate_assignment_experiment, DetectionErrorModel,
};
use fock_erasure::rng::StreamKey;
use num_complex::Complex64;
use proptest::prelude::*;

const TAU: f64 = 11.9e-6;

fn superposition(space: &FockSpace, amps: &[(usize, f64, f64)]) -> DensityMatrix {
    let terms: Vec<_> = amps.iter().map(|&(n, re, im)| (n, Complex64::new(re, im))).collect();
    Ket::superposition(space, &terms).unwrap().to_density()
}

#[test]
fn lindblad_loss_agrees_with_kraus_map() {
    let space = FockSpace::new(4).unwrap();
    let rho = superposition(&space, &[(0, 0.5, 0.0), (1, 0.1, 0.3), (2, 0.0, 0.6), (3, 0.5, 0.2)]);
    let t1 = 466e-6;
    let spec = LindbladSpec::dissipative(&space, thermal_loss_collapse_ops(t1, 0.0, &space).unwrap())
        .unwrap();
    for k in 0..10 {
        let x = k as f64 / 9.0;
        let kraus = photon_loss_kraus(1.0 / t1, x * t1, &space, 3).unwrap();
        let a = kraus.apply_unnormalized(&rho).unwrap();
        let b = lindblad_evolve(&rho, &spec, x * t1, t1 / 2000.0).unwrap();
        let c = lindblad_evolve_exact(&rho, &spec, x * t1).unwrap();
        assert!((a.elements() - b.elements()).norm() < 1e-8, "kappa tau = {x}");
        assert!((a.elements() - c.elements()).norm() < 1e-8, "kappa tau = {x}");
    }
}

#[test]
fn postselected_state_stays_in_code_space() {
    let config = ErasureQubitConfig::loss_only(1.0 / 466e-6, TAU, 13e-6, 4);
    let cycle = CycleChannel::new(&config, Protocol::Ramsey).unwrap();
    let mut rho = Protocol::Ramsey.initial_state(&cycle.space()).unwrap();
    for _ in 0..50 {
        let (next, _) = cycle.apply(&rho).unwrap();
        assert!(next.population(1) < 1e-12 && next.population(3) < 1e-12);
        rho = next;
    }
}

#[test]
fn error_free_parity_checks_repeat() {
    let space = FockSpace::new(4).unwrap();
    let model = DetectionErrorModel::ideal();
    let mut rng = StreamKey::new(9, "qnd").stream(0);
    let rho = superposition(&space, &[(0, 0.6, 0.0), (1, 0.0, 0.48), (2, 0.64, 0.0)]);
    for _ in 0..200 {
        let (first, post) = parity_measure(&rho, &model, &mut rng).unwrap();
        let (second, _) = parity_measure(&post, &model, &mut rng).unwrap();
        assert_eq!(first, second);
    }
}

#[test]
fn assignment_metrics_are_unbiased() {
    let mut model = DetectionErrorModel::ideal();
    model.p_false_positive = 0.0022;
    model.p_false_negative = 0.0069;
    let shots = 250_000;
    let data = simulate_assignment_experiment(&model, &[0, 1, 2, 3], shots, 17).unwrap();
    let m = assignment_metrics(&data);
    let fp = m.false_positive.unwrap();
    let fn_ = m.false_negative.unwrap();
    assert!((fp.value - 0.0022).abs() < 4.0 * fp.stderr.max(1e-6), "{fp:?}");
    assert!((fn_.value - 0.0069).abs() < 4.0 * fn_.stderr.max(1e-6), "{fn_:?}");
    assert_eq!(m.logical_assignment_error.unwrap().value, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn loss_channels_are_complete(x in 0.0f64..1.0, dim in 2usize..8) {
        let space = FockSpace::new(dim).unwrap();
        let ch = photon_loss_kraus(1.0, x, &space, dim - 1).unwrap();
        prop_assert!(identity_error(&ch.completeness()) < 1e-9);
    }

    #[test]
    fn lindblad_semigroup(t1 in 1e-6f64..200e-6, t2 in 1e-6f64..200e-6) {
        let space = FockSpace::new(4).unwrap();
        let spec = LindbladSpec::dissipative(
            &space,
            thermal_loss_collapse_ops(466e-6, 0.0072, &space).unwrap(),
        ).unwrap();
        let rho = superposition(&space, &[(0, 0.8, 0.0), (2, 0.0, 0.6)]);
        let a = lindblad_evolve_exact(&lindblad_evolve_exact(&rho, &spec, t1).unwrap(), &spec, t2).unwrap();
        let b = lindblad_evolve_exact(&rho, &spec, t1 + t2).unwrap();
        prop_assert!((a.elements() - b.elements()).norm() < 1e-8);
    }

    #[test]
    fn closed_form_is_non_increasing(x in 0.001f64..0.2, m in 0u64..300) {
        let kappa = x / TAU;
        let here = analytic_p1l_cycles(kappa, TAU, m).unwrap();
        prop_assert!(analytic_p1l_cycles(kappa, TAU, m + 1).unwrap() <= here);
        prop_assert!(analytic_p1l_cycles(kappa * 1.1, TAU, m).unwrap() <= here);
    }

    #[test]
    fn channel_iteration_matches_closed_form(x in 0.001f64..0.2) {
        let config = ErasureQubitConfig::loss_only(x / TAU, TAU, 13e-6, 3);
        let sim = simulate_relaxation(&config, 100).unwrap();
        for (m, p) in sim.cycles.iter().zip(&sim.p1l) {
            prop_assert!((p - analytic_p1l_cycles(x / TAU, TAU, *m).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn echo_never_loses_to_ramsey(x in 0.001f64..0.2, dim in 3usize..6) {
        let config = ErasureQubitConfig::loss_only(x / TAU, TAU, 13e-6, dim);
        let r = simulate_ramsey(&config, 80).unwrap();
        let c = simulate_cpmg(&config, 80).unwrap();
        for (r, c) in r.x_expect.iter().zip(&c.x_expect) {
            prop_assert!(*c >= *r - 1e-15);
        }
    }

    #[test]
    fn rate_evolution_conserves_population(t in 0.0f64..50e-3, start in 0usize..3) {
        let mut p0 = [0.0; 3];
        p0[start] = 1.0;
        let p = qutrit_rate_evolution(&QutritRates::measured(), p0, t).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
