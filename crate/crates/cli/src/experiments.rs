use std::f64::consts::FRAC_1_SQRT_2;

use fock_erasure::acceptance::x_half_qutrit;
use fock_erasure::benchmarking::{rb_bootstrap, rb_fit, run_rb, survival_fit, GateNoiseModel};
use fock_erasure::channels::{photon_loss_kraus, KrausChannel};
use fock_erasure::erasure::{
    channel_fidelity_decay, erasure_bias_ratio, gain_factor, intrinsic_relaxation_rate,
    missed_erasure_probability, qutrit_rate_evolution, simulate_idling, simulate_idling_mc,
    CycleChannel, ErasureQubitConfig, IdlingResult, Protocol, QutritRates,
};
use fock_erasure::fitstats::{fit_effective_relaxation, fit_exponential, fit_rate_equations, FitResult, FixedRates};
use fock_erasure::hilbert::{DensityMatrix, FockSpace, Ket};
use fock_erasure::measure::{assignment_metrics, induced_dephasing_scan, simulate_assignment_experiment, DetectionErrorModel, FinalLabel};
use fock_erasure::rng::StreamKey;
use fock_erasure::tomography::{
    chi_from_kraus, eight_point_alphas, five_point_alphas, logical_paulis_from_parity, mle_state_with,
    process_fidelity, process_tomography, process_tomography_inputs, reduced_logical_chi,
    sampled_parities, state_fidelity, MleOptions,
};
use num_complex::Complex64;
use rand_distr::{Distribution, Normal};

use crate::bundle::{ResultBundle, Series};
use crate::config::{Experiment, ExperimentConfig, LogicalState};
use crate::CliError;

/// Runs the configured experiment. Fits that fail to converge are recorded
/// in `warnings`; the caller decides how to exit.
pub fn run(config: &ExperimentConfig) -> Result<ResultBundle, CliError> {
    let mut bundle = ResultBundle::new(config);
    match config.experiment {
        Experiment::Relax => relax(config, &mut bundle)?,
        Experiment::Ramsey => coherence(config, Protocol::Ramsey, &mut bundle)?,
        Experiment::Cpmg => coherence(config, Protocol::Cpmg, &mut bundle)?,
        Experiment::Rb => rb(config, &mut bundle)?,
        Experiment::Classify => classify(config, &mut bundle)?,
        Experiment::TomoState => tomo_state(config, &mut bundle)?,
        Experiment::TomoProcess => tomo_process(config, &mut bundle)?,
        Experiment::DephasingScan => dephasing_scan(config, &mut bundle)?,
        Experiment::RateEq => rate_eq(config, &mut bundle)?,
    }
    for fit in &bundle.fits {
        if !fit.converged {
            bundle.warnings.push(format!("fit `{}` did not converge", fit.model));
        }
    }
    Ok(bundle)
}

fn idling(config: &ExperimentConfig, protocol: Protocol) -> Result<IdlingResult, CliError> {
    let section = config.idling.as_ref().expect("validated");
    let qc = config.qubit_config();
    Ok(match section.shots {
        Some(shots) => simulate_idling_mc(&qc, protocol, section.m_max, shots, config.seed)?.result,
        None => simulate_idling(&qc, protocol, section.m_max)?,
    })
}

fn idling_series(name: &str, r: &IdlingResult) -> Series {
    Series::new(name)
        .column("cycle", r.cycles.iter().map(|&m| m as f64))
        .column("time_s", r.times.iter().copied())
        .column("p1l", r.p1l.iter().copied())
        .column("x_expect", r.x_expect.iter().copied())
        .column("survival", r.survival.iter().copied())
}

/// Break-even rate of the bare `{|0>, |1>}` encoding.
fn gamma_01(qc: &ErasureQubitConfig) -> f64 {
    channel_fidelity_decay(1.0 / qc.params.t1_c, 1.0 / qc.params.t2r_c)
}

/// Interval over which photon loss goes unchecked in the simulated cycle.
fn loss_interval(qc: &ErasureQubitConfig) -> f64 {
    if qc.options.idle_during_check {
        qc.t_cycle
    } else {
        qc.tau
    }
}

fn effective_fit(qc: &ErasureQubitConfig, r: &IdlingResult) -> Result<FitResult, CliError> {
    Ok(fit_effective_relaxation(&r.times, &r.p1l, qc.params.kappa_c(), loss_interval(qc), qc.t_cycle)?)
}

fn relax(config: &ExperimentConfig, bundle: &mut ResultBundle) -> Result<(), CliError> {
    let qc = config.qubit_config();
    let r = idling(config, Protocol::Relaxation)?;
    let eff = effective_fit(&qc, &r)?;
    let mut surv = fit_exponential(&r.times, &r.survival, Some(0.0))?;
    surv.model = "survival".into();
    let gamma_int = intrinsic_relaxation_rate(qc.params.kappa_c(), loss_interval(&qc), qc.t_cycle);
    bundle.metric("gamma_int", gamma_int);
    for name in ["gamma_res", "gamma_total"] {
        if let Some(v) = eff.value(name) {
            bundle.metric(name, v);
        }
    }
    if let Some(g) = surv.value("gamma") {
        bundle.metric("erasure_rate", g);
        let p_fn = if qc.options.detection_errors {
            qc.detection_errors.p_false_negative
        } else {
            0.0
        };
        if let Ok(p) = missed_erasure_probability(g, qc.t_check(), p_fn) {
            bundle.metric("missed_erasure", p);
        }
    }
    bundle.fits.push(surv);
    bundle.metric("gamma_01", gamma_01(&qc));
    bundle.fits.push(eff);
    bundle.series.push(idling_series("relaxation", &r));
    Ok(())
}

fn coherence(config: &ExperimentConfig, protocol: Protocol, bundle: &mut ResultBundle) -> Result<(), CliError> {
    let qc = config.qubit_config();
    let r = idling(config, protocol)?;
    let mut fit = fit_exponential(&r.times, &r.x_expect, Some(0.0))?;
    fit.model = format!("{}_coherence", config.experiment.name());
    let name = if protocol == Protocol::Cpmg { "cpmg" } else { "ramsey" };
    bundle.series.push(idling_series(name, &r));
    if let Some(gamma_phase) = fit.value("gamma") {
        bundle.metric("gamma_phase", gamma_phase);
        // Relaxation under the same cycle gives the other half of the
        // logical error rate.
        let relax = simulate_idling(&qc, Protocol::Relaxation, config.idling.as_ref().expect("validated").m_max)?;
        if let Some(gamma_relax) = effective_fit(&qc, &relax)?.value("gamma_total") {
            let g02 = channel_fidelity_decay(gamma_relax, gamma_phase);
            let g01 = gamma_01(&qc);
            bundle.metric("gamma_relax", gamma_relax);
            bundle.metric("gamma_02", g02);
            bundle.metric("gamma_01", g01);
            bundle.metric("gain_factor", gain_factor(g01, g02));
        }
    }
    bundle.fits.push(fit);
    Ok(())
}

fn rb(config: &ExperimentConfig, bundle: &mut ResultBundle) -> Result<(), CliError> {
    let s = config.rb.as_ref().expect("validated");
    let noise = GateNoiseModel {
        p_erasure_per_gate: s.p_erasure_per_gate,
        residual_channel: GateNoiseModel::depolarizing_residual(s.residual_per_gate)?,
        gate_duration: s.gate_duration.0,
    };
    let data = run_rb(&config.qubit_config(), &noise, &s.lengths, s.shots_per_length, config.seed)?;
    bundle.series.push(
        Series::new("rb")
            .column("length", s.lengths.iter().map(|&m| m as f64))
            .column("survival", data.survival.iter().copied())
            .column("p0l", data.p0l.iter().copied())
            .column("kept", data.kept.iter().map(|&k| k as f64)),
    );
    let fix = (!s.free_offset).then_some(s.offset);
    let surv_fix = (!s.free_offset).then_some(0.0);
    let (lengths, p0l): (Vec<usize>, Vec<f64>) = s
        .lengths
        .iter()
        .zip(&data.p0l)
        .filter(|(_, p)| p.is_finite())
        .map(|(&m, &p)| (m, p))
        .unzip();
    if lengths.len() < s.lengths.len() {
        bundle
            .warnings
            .push("lengths with no surviving shots were left out of the p0L fit".into());
    }
    let mut fit = rb_fit(&lengths, &p0l, fix)?;
    let survival = survival_fit(&s.lengths, &data.survival, surv_fix)?;
    bundle.metric("p", fit.p);
    bundle.metric("r_clifford", fit.r_clifford);
    bundle.metric("r_gate", fit.r_gate);
    bundle.metric("erasure_per_clifford", survival.erasure_per_clifford);
    bundle.metric("erasure_per_gate", survival.erasure_per_gate);
    if s.bootstrap > 0 {
        let cis = rb_bootstrap(&data, fix, s.bootstrap, config.seed)?;
        fit.fit.attach_intervals(&["p"], &cis[..1]);
        for (name, ci) in ["p", "r_clifford", "r_gate"].iter().zip(&cis) {
            bundle.metric(&format!("{name}_ci_lower"), ci.lower);
            bundle.metric(&format!("{name}_ci_upper"), ci.upper);
        }
    }
    bundle.fits.push(fit.fit);
    bundle.fits.push(survival.fit);
    Ok(())
}

fn classify(config: &ExperimentConfig, bundle: &mut ResultBundle) -> Result<(), CliError> {
    let s = config.classify.as_ref().expect("validated");
    let model = if config.cycle.detection_errors {
        config.detection_model()
    } else {
        DetectionErrorModel::ideal()
    };
    let shots = simulate_assignment_experiment(&model, &s.prepared, s.shots_per_state, config.seed)?;
    let m = assignment_metrics(&shots);
    for (name, est) in [
        ("logical_assignment_error", m.logical_assignment_error),
        ("false_positive", m.false_positive),
        ("false_negative", m.false_negative),
    ] {
        if let Some(e) = est {
            bundle.metric(name, e.value);
            bundle.metric(&format!("{name}_stderr"), e.stderr);
        }
    }
    let mut table = vec![[0.0f64; 5]; s.prepared.len()];
    for (prepared, rec) in &shots {
        let row = s.prepared.iter().position(|p| p == prepared).expect("prepared level");
        if let FinalLabel::Fock(n) = rec.final_label() {
            table[row][usize::from(n).min(3)] += 1.0;
        }
        if rec.erased() {
            table[row][4] += 1.0;
        }
    }
    let n = s.shots_per_state as f64;
    let col = |k: usize| table.iter().map(move |r| r[k] / n).collect::<Vec<_>>();
    bundle.series.push(
        Series::new("confusion")
            .column("prepared", s.prepared.iter().map(|&p| p as f64))
            .column("p_00", col(0))
            .column("p_01", col(1))
            .column("p_10", col(2))
            .column("p_11", col(3))
            .column("flagged", col(4)),
    );
    Ok(())
}

fn logical_state(state: LogicalState) -> DensityMatrix {
    let space = FockSpace::new(3).expect("qutrit space");
    let h = FRAC_1_SQRT_2;
    let (a0, a2) = match state {
        LogicalState::Zero => (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
        LogicalState::One => (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
        LogicalState::PlusX => (Complex64::new(h, 0.0), Complex64::new(h, 0.0)),
        LogicalState::MinusX => (Complex64::new(h, 0.0), Complex64::new(-h, 0.0)),
        LogicalState::PlusY => (Complex64::new(h, 0.0), Complex64::new(0.0, h)),
        LogicalState::MinusY => (Complex64::new(h, 0.0), Complex64::new(0.0, -h)),
    };
    Ket::superposition(&space, &[(0, a0), (2, a2)])
        .expect("normalized")
        .to_density()
}

fn tomo_state(config: &ExperimentConfig, bundle: &mut ResultBundle) -> Result<(), CliError> {
    let s = config.tomo_state.as_ref().expect("validated");
    let target = logical_state(s.state);
    let mut rho = target.resized(config.cycle.dim);
    if s.idle_cycles > 0 {
        let cycle = CycleChannel::new(&config.qubit_config(), Protocol::Relaxation)?;
        for _ in 0..s.idle_cycles {
            rho = cycle.apply(&rho)?.0;
        }
    }
    let alphas: Vec<Complex64> = if s.points == 5 {
        five_point_alphas().to_vec()
    } else {
        eight_point_alphas().to_vec()
    };
    let mut rng = StreamKey::new(config.seed, "tomo-state").stream(0);
    let samples = sampled_parities(&rho, &alphas, s.shots, &mut rng)?;
    let options = MleOptions {
        cost: s.cost,
        ..MleOptions::default()
    };
    let subspace = if s.points == 5 { 2 } else { 3 };
    let fit = mle_state_with(&samples, subspace, &options)?;
    bundle.series.push(
        Series::new("parity")
            .column("re_alpha", samples.iter().map(|w| w.alpha.re))
            .column("im_alpha", samples.iter().map(|w| w.alpha.im))
            .column("parity_expectation", samples.iter().map(|w| w.parity_expectation))
            .column("shots", samples.iter().map(|w| w.shots as f64)),
    );
    if s.points == 5 {
        let p: Vec<f64> = samples.iter().map(|w| w.parity_expectation).collect();
        let v = logical_paulis_from_parity([p[0], p[1], p[2], p[3], p[4]]);
        bundle.metric("pauli_x", v.x);
        bundle.metric("pauli_y", v.y);
        bundle.metric("pauli_z", v.z);
    }
    bundle.metric("fidelity", state_fidelity(&fit.state, &target)?);
    bundle.metric("mle_cost", fit.cost);
    bundle.metric("mle_iterations", fit.iterations as f64);
    let e = fit.state.elements();
    bundle.series.push(
        Series::new("density")
            .column("row", (0..9).map(|k| (k / 3) as f64))
            .column("col", (0..9).map(|k| (k % 3) as f64))
            .column("re", (0..9).map(|k| e[(k / 3, k % 3)].re))
            .column("im", (0..9).map(|k| e[(k / 3, k % 3)].im)),
    );
    if !fit.converged {
        bundle
            .warnings
            .push(format!("state MLE stopped after {} iterations", fit.iterations));
    }
    Ok(())
}

fn tomo_process(config: &ExperimentConfig, bundle: &mut ResultBundle) -> Result<(), CliError> {
    let s = config.tomo_process.as_ref().expect("validated");
    let space = FockSpace::new(3)?;
    let gate = KrausChannel::unitary(x_half_qutrit())?;
    let loss = photon_loss_kraus(config.system.apply().kappa_c(), s.gate_duration.0, &space, 2)?;
    let noisy = gate.then(&loss)?;
    let inputs = process_tomography_inputs();
    let outputs = inputs
        .iter()
        .map(|r| noisy.apply_unnormalized(r))
        .collect::<Result<Vec<_>, _>>()?;
    let chi = process_tomography(&inputs, &outputs)?;
    let ideal = chi_from_kraus(&gate)?;
    bundle.metric("process_fidelity", process_fidelity(&chi, &ideal)?);
    bundle.metric(
        "process_fidelity_reduced",
        process_fidelity(&reduced_logical_chi(&chi)?, &reduced_logical_chi(&ideal)?)?,
    );
    bundle.metric("leakage_dominated", f64::from(u8::from(chi.leakage_dominated)));
    let n = chi.elements.nrows();
    bundle.series.push(
        Series::new("chi")
            .column("m", (0..n * n).map(|k| (k / n) as f64))
            .column("n", (0..n * n).map(|k| (k % n) as f64))
            .column("re", (0..n * n).map(|k| chi.elements[(k / n, k % n)].re))
            .column("im", (0..n * n).map(|k| chi.elements[(k / n, k % n)].im)),
    );
    Ok(())
}

fn dephasing_scan(config: &ExperimentConfig, bundle: &mut ResultBundle) -> Result<(), CliError> {
    let s = config.dephasing_scan.as_ref().expect("validated");
    let scan = induced_dephasing_scan(&config.qubit_config(), &s.m_list, s.tau_tot.0)?;
    if let Some(p) = scan.dephasing_per_check {
        bundle.metric("dephasing_per_check", p);
    }
    if let Some(k) = scan.log_slope {
        bundle.metric("log_slope", k);
    }
    bundle.series.push(
        Series::new("dephasing_scan")
            .column("m", scan.m.iter().map(|&m| m as f64))
            .column("x_expect", scan.x_expect.iter().copied())
            .column("survival", scan.survival.iter().copied()),
    );
    Ok(())
}

fn rate_eq(config: &ExperimentConfig, bundle: &mut ResultBundle) -> Result<(), CliError> {
    let s = config.rate_eq.as_ref().expect("validated");
    let params = config.system.apply();
    let truth = QutritRates {
        gamma_10: 1.0 / params.t1_c,
        gamma_01: params.nth_c / params.t1_c,
        ..QutritRates::measured()
    };
    let t: Vec<f64> = (0..s.n_points)
        .map(|i| s.t_max.0 * i as f64 / (s.n_points - 1) as f64)
        .collect();
    let noise = Normal::new(0.0, s.noise).map_err(|e| CliError::Config(format!("`rate_eq.noise`: {e}")))?;
    let mut rng = StreamKey::new(config.seed, "rate-eq-noise").stream(0);
    let mut pops = Vec::with_capacity(t.len());
    for &ti in &t {
        let p = qutrit_rate_evolution(&truth, [0.0, 0.0, 1.0], ti)?;
        pops.push(p.map(|x| x + noise.sample(&mut rng)));
    }
    let fixed = FixedRates {
        gamma_10: truth.gamma_10,
        gamma_01: truth.gamma_01,
        initial: [0.0, 0.0, 1.0],
    };
    let fit = fit_rate_equations(&t, &pops, fixed)?;
    if let (Some(g21), Some(g12)) = (fit.value("gamma_21"), fit.value("gamma_12")) {
        bundle.metric("gamma_21", g21);
        bundle.metric("gamma_12", g12);
        let fitted = QutritRates {
            gamma_21: g21,
            gamma_12: g12,
            ..truth
        };
        if let Ok(r) = erasure_bias_ratio(&fitted) {
            bundle.metric("bias_ratio", r);
        }
    }
    for flag in &fit.flags {
        bundle.warnings.push(format!("rate_equations: {flag}"));
    }
    bundle.series.push(
        Series::new("populations")
            .column("time_s", t.iter().copied())
            .column("p0", pops.iter().map(|p| p[0]))
            .column("p1", pops.iter().map(|p| p[1]))
            .column("p2", pops.iter().map(|p| p[2])),
    );
    bundle.fits.push(fit);
    Ok(())
}
