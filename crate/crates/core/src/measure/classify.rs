use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use super::{parity_measure, DetectionErrorModel, FinalLabel, ShotRecord};
use crate::error::{invalid, Error, Result};
use crate::hilbert::{DensityMatrix, FockSpace};
use crate::rng::StreamKey;

fn populations(rho: &DensityMatrix) -> Result<Vec<f64>> {
    let p: Vec<f64> = (0..rho.dim()).map(|n| rho.population(n).max(0.0)).collect();
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!(
            "measurement needs a normalized state, trace = {total}"
        )));
    }
    Ok(p)
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Ancilla excitation probability of the mod-2 step, `(1 - cos(n pi)) / 2`.
fn mod2_excitation(n: usize) -> f64 {
    (1.0 - (n as f64 * PI).cos()) / 2.0
}

/// Ancilla excitation probability of the mod-4 step, conditioned on the
/// reported mod-2 bit.
fn mod4_excitation(n: usize, b1: bool) -> f64 {
    let phase = n as f64 * PI / 2.0;
    let p = if b1 { (1.0 - phase.sin()) / 2.0 } else { (1.0 - phase.cos()) / 2.0 };
    p.clamp(0.0, 1.0)
}

/// Sequential mod(n,2) then mod(n,4) parity measurement.
///
/// Returns the bit string `b2 b1` and the Fock label it encodes
/// ('00' -> 0, '01' -> 1, '10' -> 2, '11' -> 3). Both ancilla readouts go
/// through the readout confusion matrix.
pub fn mod2_then_mod4_classify<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    model: &DetectionErrorModel,
    rng: &mut R,
) -> Result<(String, FinalLabel)> {
    if rho.dim() < 4 {
        return Err(invalid("dim", format!("cascaded classification needs dim >= 4, got {}", rho.dim())));
    }
    let p = populations(rho)?;
    let n = sample_index(&p, rng);
    let b1 = rng.random::<f64>() < model.ancilla_reads_one(mod2_excitation(n));
    let b2 = rng.random::<f64>() < model.ancilla_reads_one(mod4_excitation(n, b1));
    let bits = format!("{}{}", u8::from(b2), u8::from(b1));
    Ok((bits, FinalLabel::Fock(2 * u8::from(b2) + u8::from(b1))))
}

/// Exact label distribution `[P(0), P(1), P(2), P(3)]` of the cascaded
/// measurement for given Fock populations.
pub fn cascaded_label_distribution(populations: &[f64], model: &DetectionErrorModel) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (n, &pn) in populations.iter().enumerate() {
        let r1 = model.ancilla_reads_one(mod2_excitation(n));
        for (b1, w1) in [(false, 1.0 - r1), (true, r1)] {
            let r2 = model.ancilla_reads_one(mod4_excitation(n, b1));
            for (b2, w2) in [(false, 1.0 - r2), (true, r2)] {
                out[2 * usize::from(b2) + usize::from(b1)] += pn * w1 * w2;
            }
        }
    }
    out
}

fn pnr_probes(dim: usize) -> usize {
    dim.min(4) - 1
}

/// Photon-number-resolved readout with selective ancilla flips.
///
/// Levels `0..L-1` (with `L = min(dim, 4)`) are probed in order; the first
/// probe read as '1' names the level, and if none fires the label is `L-1`.
pub fn photon_number_resolved_measure<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    model: &DetectionErrorModel,
    rng: &mut R,
) -> Result<FinalLabel> {
    let p = populations(rho)?;
    let n = sample_index(&p, rng);
    let probes = pnr_probes(rho.dim());
    for k in 0..probes {
        let excited = if n == k { 1.0 } else { 0.0 };
        if rng.random::<f64>() < model.ancilla_reads_one(excited) {
            return Ok(FinalLabel::Fock(k as u8));
        }
    }
    Ok(FinalLabel::Fock(probes as u8))
}

/// Exact label distribution of [`photon_number_resolved_measure`].
pub fn pnr_label_distribution(populations: &[f64], model: &DetectionErrorModel) -> Vec<f64> {
    let probes = pnr_probes(populations.len().max(2));
    let mut out = vec![0.0; probes + 1];
    for (n, &pn) in populations.iter().enumerate() {
        let mut none_yet = 1.0;
        for (k, slot) in out.iter_mut().enumerate().take(probes) {
            let fire = model.ancilla_reads_one(if n == k { 1.0 } else { 0.0 });
            *slot += pn * none_yet * fire;
            none_yet *= 1.0 - fire;
        }
        out[probes] += pn * none_yet;
    }
    out
}

/// Prepares each Fock level in `prepared`, runs one erasure check and then
/// the cascaded classification. Returns `(prepared level, record)` pairs in a
/// scheduling-independent order.
pub fn simulate_assignment_experiment(
    model: &DetectionErrorModel,
    prepared: &[usize],
    shots_per_state: usize,
    seed: u64,
) -> Result<Vec<(usize, ShotRecord)>> {
    model.validate()?;
    let space = FockSpace::new(4)?;
    let key = StreamKey::new(seed, "assignment");
    let mut out = Vec::with_capacity(prepared.len() * shots_per_state);
    for (j, &level) in prepared.iter().enumerate() {
        let rho = DensityMatrix::fock(&space, level)?;
        let sub = key.child(j as u64);
        let shots: Result<Vec<_>> = (0..shots_per_state)
            .into_par_iter()
            .map(|i| {
                let mut rng = sub.stream(i as u64);
                let (bit, post) = parity_measure(&rho, model, &mut rng)?;
                let (_, label) = mod2_then_mod4_classify(&post, model, &mut rng)?;
                Ok((level, ShotRecord::new(vec![bit], label)))
            })
            .collect();
        out.extend(shots?);
    }
    Ok(out)
}
