use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::clifford::{clifford_table, compose_elements, inverse_element, Primitive};
use crate::channels::{KrausChannel, SuperOperator};
use crate::erasure::{code_projector, idle_channel, ErasureQubitConfig};
use crate::error::{invalid, Error, Result};
use crate::fitstats::{fit_power_decay, ConfidenceInterval, FitResult};
use crate::hilbert::{CMatrix, DensityMatrix, FockSpace};
use crate::measure::{check_instrument, pnr_label_distribution, DetectionErrorModel};
use crate::rng::StreamKey;

/// Per-gate divisor used to convert per-Clifford errors to per-pulse ones.
pub const X_HALF_PER_CLIFFORD: f64 = 2.17;

/// Gate errors applied after every physical `X_L/2` pulse: the residual
/// channel on the code space, leakage of both codewords to `|1>` with
/// probability `p_erasure_per_gate`, then idling for `gate_duration`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateNoiseModel {
    pub p_erasure_per_gate: f64,
    /// Kraus channel on `(|0>, |2>)`, 2x2 operators.
    pub residual_channel: KrausChannel,
    /// Seconds.
    pub gate_duration: f64,
}

impl Default for GateNoiseModel {
    fn default() -> Self {
        Self {
            p_erasure_per_gate: 0.0,
            residual_channel: KrausChannel::identity(2),
            gate_duration: 1.2e-6,
        }
    }
}

impl GateNoiseModel {
    /// No errors and zero-duration pulses.
    pub fn noiseless() -> Self {
        Self {
            gate_duration: 0.0,
            ..Self::default()
        }
    }

    /// Depolarizing residual `rho -> (1 - l) rho + l I/2` with average gate
    /// error `r = l/2`.
    pub fn depolarizing_residual(r: f64) -> Result<KrausChannel> {
        if !(0.0..=0.5).contains(&r) {
            return Err(invalid("r", format!("must lie in [0, 0.5], got {r}")));
        }
        let l = 2.0 * r;
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let pauli = [
            CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
            CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]),
            CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]),
        ];
        let mut ops = vec![CMatrix::identity(2, 2).scale((1.0 - 0.75 * l).sqrt())];
        ops.extend(pauli.iter().map(|p| p.scale((l / 4.0).sqrt())));
        KrausChannel::new(ops, true)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_erasure_per_gate) {
            return Err(invalid("p_erasure_per_gate", "must be a probability"));
        }
        if self.residual_channel.dim() != 2 || !self.residual_channel.is_trace_preserving() {
            return Err(invalid("residual_channel", "must be a trace-preserving 2x2 channel"));
        }
        if !(self.gate_duration >= 0.0 && self.gate_duration.is_finite()) {
            return Err(invalid("gate_duration", "must be >= 0"));
        }
        Ok(())
    }
}

/// Random Clifford sequence and the element that inverts it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RbSequence {
    pub gates: Vec<usize>,
    pub recovery: usize,
}

fn draw_sequence<R: Rng + ?Sized>(m: usize, rng: &mut R) -> RbSequence {
    let mut net = 0;
    let gates: Vec<usize> = (0..m)
        .map(|_| {
            let g = rng.random_range(0..24);
            net = compose_elements(net, g);
            g
        })
        .collect();
    RbSequence {
        gates,
        recovery: inverse_element(net),
    }
}

/// `m` uniformly random Cliffords and their recovery element.
pub fn compile_rb_sequence(m: usize, seed: u64) -> RbSequence {
    let mut rng = StreamKey::new(seed, "rb-sequence").stream(m as u64);
    draw_sequence(m, &mut rng)
}

/// Embeds a code-space operator; other levels get `rest` on the diagonal.
fn embed(op: &CMatrix, dim: usize, rest: f64) -> CMatrix {
    let mut m = CMatrix::identity(dim, dim).scale(rest);
    let idx = [0usize, 2];
    for i in 0..2 {
        for j in 0..2 {
            m[(idx[i], idx[j])] = op[(i, j)];
        }
    }
    m
}

/// Kept-branch superoperators of the 24 noisy Cliffords, each followed by a
/// check.
fn clifford_superoperators(
    config: &ErasureQubitConfig,
    noise: &GateNoiseModel,
    space: &FockSpace,
) -> Result<Vec<SuperOperator>> {
    let d = space.dim();
    let residual: Vec<CMatrix> = noise
        .residual_channel
        .operators()
        .iter()
        .enumerate()
        .map(|(k, op)| embed(op, d, if k == 0 { 1.0 } else { 0.0 }))
        .collect();
    let residual = KrausChannel::new(residual, true)?.to_superoperator();
    let p = noise.p_erasure_per_gate;
    let mut leak = vec![embed(&CMatrix::identity(2, 2).scale((1.0 - p).sqrt()), d, 1.0)];
    if p > 0.0 {
        for level in [0, 2] {
            let mut k = CMatrix::zeros(d, d);
            k[(1, level)] = Complex64::new(p.sqrt(), 0.0);
            leak.push(k);
        }
    }
    let leak = KrausChannel::new(leak, true)?.to_superoperator();
    let idle = if noise.gate_duration > 0.0 {
        Some(idle_channel(config, space, noise.gate_duration)?.to_superoperator())
    } else {
        None
    };
    let mut pulse = KrausChannel::unitary(embed(&Primitive::XHalf.unitary(), d, 1.0))?
        .to_superoperator()
        .then(&residual)?
        .then(&leak)?;
    if let Some(idle) = &idle {
        pulse = pulse.then(idle)?;
    }
    let mut check = if config.options.detection_errors {
        let [keep, _] = check_instrument(space, &config.detection_errors)?;
        keep.to_superoperator()
    } else {
        KrausChannel::new(vec![code_projector(space)], false)?.to_superoperator()
    };
    if config.options.idle_during_check {
        check = idle_channel(config, space, config.t_check())?
            .to_superoperator()
            .then(&check)?;
    }
    clifford_table()
        .iter()
        .map(|c| {
            let mut s = KrausChannel::identity(d).to_superoperator();
            for prim in &c.decomposition {
                s = if prim.is_physical() {
                    s.then(&pulse)?
                } else {
                    let u = embed(&prim.unitary(), d, 1.0);
                    s.then(&KrausChannel::unitary(u)?.to_superoperator())?
                };
            }
            s.then(&check)
        })
        .collect()
}

/// Per-length RB statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbData {
    pub lengths: Vec<usize>,
    pub shots_per_length: usize,
    /// Shots with no erasure flagged at any check.
    pub kept: Vec<usize>,
    /// Kept shots read as `|0_L>`.
    pub zero_hits: Vec<usize>,
    pub survival: Vec<f64>,
    /// `zero_hits / kept`; NaN when nothing survived.
    pub p0l: Vec<f64>,
}

/// Simulates RB from `|0_L>`: every shot draws its own random sequence,
/// which is evolved exactly through the kept branches of all checks; the
/// shot then survives with the resulting probability and is read out with
/// photon-number-resolved measurement of `|0>`.
pub fn run_rb(
    config: &ErasureQubitConfig,
    noise: &GateNoiseModel,
    lengths: &[usize],
    shots_per_length: usize,
    seed: u64,
) -> Result<RbData> {
    config.validate()?;
    noise.validate()?;
    if shots_per_length == 0 {
        return Err(invalid("shots_per_length", "must be > 0"));
    }
    let space = FockSpace::new(config.dim)?;
    let cliffords = clifford_superoperators(config, noise, &space)?;
    let model = if config.options.detection_errors {
        config.detection_errors.clone()
    } else {
        DetectionErrorModel::ideal()
    };
    let rho0 = DensityMatrix::fock(&space, 0)?;
    let v0 = nalgebra::DVector::from_column_slice(rho0.elements().as_slice());
    let d = space.dim();
    let key = StreamKey::new(seed, "rb");

    let mut out = RbData {
        lengths: lengths.to_vec(),
        shots_per_length,
        kept: Vec::new(),
        zero_hits: Vec::new(),
        survival: Vec::new(),
        p0l: Vec::new(),
    };
    for (li, &m) in lengths.iter().enumerate() {
        let stream = key.child(li as u64);
        let counts: Result<Vec<(bool, bool)>> = (0..shots_per_length)
            .into_par_iter()
            .map(|shot| {
                let mut rng = stream.stream(shot as u64);
                let seq = draw_sequence(m, &mut rng);
                let mut v = v0.clone();
                for &g in seq.gates.iter().chain(std::iter::once(&seq.recovery)) {
                    v = cliffords[g].matrix() * v;
                }
                let rho = CMatrix::from_column_slice(d, d, v.as_slice());
                let survival = rho.trace().re;
                if !(rng.random::<f64>() < survival) {
                    return Ok((false, false));
                }
                let pops: Vec<f64> = (0..d).map(|n| (rho[(n, n)].re / survival).max(0.0)).collect();
                let p0 = pnr_label_distribution(&pops, &model)[0];
                Ok((true, rng.random::<f64>() < p0))
            })
            .collect();
        let counts = counts?;
        let kept = counts.iter().filter(|c| c.0).count();
        let hits = counts.iter().filter(|c| c.1).count();
        out.kept.push(kept);
        out.zero_hits.push(hits);
        out.survival.push(kept as f64 / shots_per_length as f64);
        out.p0l.push(if kept > 0 { hits as f64 / kept as f64 } else { f64::NAN });
    }
    Ok(out)
}

/// Result of fitting `F(M) = A p^M + B` to the postselected `|0_L>`
/// population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbFit {
    #[serde(rename = "A")]
    pub a: f64,
    pub p: f64,
    #[serde(rename = "B")]
    pub b: f64,
    /// `(1 - p) / 2`.
    pub r_clifford: f64,
    /// `r_clifford / 2.17`.
    pub r_gate: f64,
    pub fit: FitResult,
}

fn finite_points(lengths: &[usize], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    lengths
        .iter()
        .zip(y)
        .filter(|(_, v)| v.is_finite())
        .map(|(m, v)| (*m as f64, *v))
        .unzip()
}

/// Least-squares fit of the postselected decay; `fix_offset = Some(0.5)`
/// pins `B` to the fully depolarized value.
pub fn rb_fit(lengths: &[usize], p0l: &[f64], fix_offset: Option<f64>) -> Result<RbFit> {
    if lengths.len() != p0l.len() {
        return Err(Error::DimensionMismatch {
            expected: lengths.len(),
            found: p0l.len(),
        });
    }
    let (m, y) = finite_points(lengths, p0l);
    let fit = fit_power_decay(&m, &y, fix_offset)?;
    let p = fit.value("p").unwrap_or(f64::NAN);
    let r_clifford = (1.0 - p) / 2.0;
    Ok(RbFit {
        a: fit.value("A").unwrap_or(f64::NAN),
        p,
        b: fix_offset.or_else(|| fit.value("B")).unwrap_or(f64::NAN),
        r_clifford,
        r_gate: r_clifford / X_HALF_PER_CLIFFORD,
        fit,
    })
}

/// Fit of the postselection survival `A s^M (+ B)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalFit {
    #[serde(rename = "A")]
    pub a: f64,
    /// Per-Clifford survival factor.
    pub s: f64,
    #[serde(rename = "B")]
    pub b: f64,
    /// `1 - s`.
    pub erasure_per_clifford: f64,
    /// `(1 - s) / 2.17`.
    pub erasure_per_gate: f64,
    pub fit: FitResult,
}

pub fn survival_fit(lengths: &[usize], survival: &[f64], fix_offset: Option<f64>) -> Result<SurvivalFit> {
    if lengths.len() != survival.len() {
        return Err(Error::DimensionMismatch {
            expected: lengths.len(),
            found: survival.len(),
        });
    }
    let (m, y) = finite_points(lengths, survival);
    let fit = fit_power_decay(&m, &y, fix_offset)?;
    let s = fit.value("p").unwrap_or(f64::NAN);
    Ok(SurvivalFit {
        a: fit.value("A").unwrap_or(f64::NAN),
        s,
        b: fix_offset.or_else(|| fit.value("B")).unwrap_or(f64::NAN),
        erasure_per_clifford: 1.0 - s,
        erasure_per_gate: (1.0 - s) / X_HALF_PER_CLIFFORD,
        fit,
    })
}

/// Bootstrap intervals for `(p, r_clifford, r_gate)` by resampling the shots
/// of every length with replacement and refitting.
pub fn rb_bootstrap(
    data: &RbData,
    fix_offset: Option<f64>,
    n_resamples: usize,
    seed: u64,
) -> Result<Vec<ConfidenceInterval>> {
    if n_resamples == 0 {
        return Err(invalid("n_resamples", "must be > 0"));
    }
    let point = rb_fit(&data.lengths, &data.p0l, fix_offset)?;
    let estimate = [point.p, point.r_clifford, point.r_gate];
    let key = StreamKey::new(seed, "rb-bootstrap");
    let n = data.shots_per_length as u64;
    let draws: Vec<Option<[f64; 3]>> = (0..n_resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = key.stream(i as u64);
            let p0l: Vec<f64> = data
                .kept
                .iter()
                .zip(&data.zero_hits)
                .map(|(&kept, &hits)| {
                    let keep_p = kept as f64 / n as f64;
                    let k = Binomial::new(n, keep_p).ok()?.sample(&mut rng);
                    if k == 0 {
                        return Some(f64::NAN);
                    }
                    let hit_p = if kept > 0 { hits as f64 / kept as f64 } else { 0.0 };
                    let h = Binomial::new(k, hit_p).ok()?.sample(&mut rng);
                    Some(h as f64 / k as f64)
                })
                .collect::<Option<Vec<f64>>>()?;
            let fit = rb_fit(&data.lengths, &p0l, fix_offset).ok()?;
            let v = [fit.p, fit.r_clifford, fit.r_gate];
            v.iter().all(|x| x.is_finite()).then_some(v)
        })
        .collect();
    let ok: Vec<[f64; 3]> = draws.into_iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::Numerical("every bootstrap refit failed".into()));
    }
    let failures = n_resamples - ok.len();
    Ok((0..3)
        .map(|j| {
            let est = estimate[j];
            let (lower, upper) = if n_resamples == 1 {
                (est, est)
            } else {
                let mut v: Vec<f64> = ok.iter().map(|r| r[j]).collect();
                v.sort_by(f64::total_cmp);
                let at = |q: f64| v[((v.len() - 1) as f64 * q).round() as usize];
                (at(0.025).min(est), at(0.975).max(est))
            };
            ConfidenceInterval {
                estimate: est,
                lower,
                upper,
                level: 0.95,
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
    use crate::benchmarking::equal_up_to_phase;

    fn config() -> ErasureQubitConfig {
        ErasureQubitConfig {
            dim: 3,
            ..ErasureQubitConfig::default()
        }
    }

    #[test]
    fn recovery_inverts_sequence() {
        for seed in 0..20 {
            for m in [0, 1, 7, 50] {
                let seq = compile_rb_sequence(m, seed);
                let table = clifford_table();
                let u = seq
                    .gates
                    .iter()
                    .chain(std::iter::once(&seq.recovery))
                    .fold(CMatrix::identity(2, 2), |acc, &g| &table[g].su2 * acc);
                assert!(equal_up_to_phase(&u, &CMatrix::identity(2, 2)));
                assert_eq!(seq, compile_rb_sequence(m, seed));
            }
        }
        assert_eq!(compile_rb_sequence(0, 5).recovery, 0);
    }

    #[test]
    fn noiseless_rb_is_perfect() {
        let data = run_rb(&config(), &GateNoiseModel::noiseless(), &[0, 5, 20], 200, 1).unwrap();
        assert!(data.survival.iter().all(|&s| s == 1.0));
        assert!(data.p0l.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn erasure_only_leaves_postselected_population_intact() {
        let noise = GateNoiseModel {
            p_erasure_per_gate: 0.05,
            ..GateNoiseModel::noiseless()
        };
        let data = run_rb(&config(), &noise, &[0, 10, 20], 500, 2).unwrap();
        assert!(data.p0l.iter().all(|&p| p == 1.0));
        assert!(data.survival[2] < data.survival[1] && data.survival[1] < data.survival[0]);
    }

    #[test]
    fn idle_loss_during_pulses_adds_erasure() {
        let base = GateNoiseModel::noiseless();
        let slow = GateNoiseModel {
            gate_duration: 5e-6,
            ..GateNoiseModel::noiseless()
        };
        let a = run_rb(&config(), &base, &[40], 2000, 3).unwrap();
        let b = run_rb(&config(), &slow, &[40], 2000, 3).unwrap();
        assert!(b.survival[0] < a.survival[0]);
    }

    #[test]
    fn exact_synthetic_fit() {
        let m: Vec<usize> = (0..30).map(|i| i * 10).collect();
        let y: Vec<f64> = m.iter().map(|&m| 0.5 * 0.99f64.powi(m as i32) + 0.5).collect();
        let fit = rb_fit(&m, &y, Some(0.5)).unwrap();
        assert!((fit.p - 0.99).abs() < 1e-9);
        assert!((fit.r_clifford - 0.005).abs() < 1e-9);
        assert!((6.21e-3 / X_HALF_PER_CLIFFORD - 2.86e-3).abs() < 5e-6);
    }

    #[test]
    fn bootstrap_brackets_estimate() {
        let noise = GateNoiseModel {
            residual_channel: GateNoiseModel::depolarizing_residual(5e-3).unwrap(),
            ..GateNoiseModel::noiseless()
        };
        let data = run_rb(&config(), &noise, &[0, 20, 40, 80], 1000, 4).unwrap();
        let cis = rb_bootstrap(&data, Some(0.5), 100, 7).unwrap();
        for ci in &cis {
            assert!(ci.lower <= ci.estimate && ci.estimate <= ci.upper);
        }
        assert_eq!(cis, rb_bootstrap(&data, Some(0.5), 100, 7).unwrap());
    }
}
