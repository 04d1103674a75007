use rand::Rng;

use super::DetectionErrorModel;
use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::hilbert::{diagonal, CMatrix, DensityMatrix, FockSpace};

/// `diag((-1)^floor(n/2))`: a logical Z on `{|0>, |2>}` that leaves the parity
/// sectors intact.
pub fn logical_phase_flip(space: &FockSpace) -> CMatrix {
    diagonal(space, |n| if (n / 2) % 2 == 0 { 1.0 } else { -1.0 })
}

/// Quantum instrument of one parity check: `[report '0', report '1']`.
///
/// Each branch projects onto a parity sector, weights each Fock level by the
/// probability of the reported bit, then applies phase damping with
/// probability `p_induced_dephasing`. The two branches sum to a
/// trace-preserving map.
pub fn check_instrument(space: &FockSpace, model: &DetectionErrorModel) -> Result<[KrausChannel; 2]> {
    model.validate()?;
    let even = diagonal(space, |n| if n % 2 == 0 { 1.0 } else { 0.0 });
    let odd = diagonal(space, |n| if n % 2 == 1 { 1.0 } else { 0.0 });
    let z = logical_phase_flip(space);
    let pd = model.p_induced_dephasing;
    let branch = |report_one: bool| -> Result<KrausChannel> {
        let weights = diagonal(space, |n| {
            let p1 = model.check_reports_one(n);
            if report_one { p1.sqrt() } else { (1.0 - p1).sqrt() }
        });
        let mut ops = Vec::new();
        for sector in [&even, &odd] {
            let m = &weights * sector;
            if m.iter().all(|z| z.norm_sqr() == 0.0) {
                continue;
            }
            if pd < 1.0 {
                ops.push(m.scale((1.0 - pd).sqrt()));
            }
            if pd > 0.0 {
                ops.push((&z * &m).scale(pd.sqrt()));
            }
        }
        if ops.is_empty() {
            ops.push(space.zeros());
        }
        KrausChannel::new(ops, false)
    };
    Ok([branch(false)?, branch(true)?])
}

/// Samples one parity check on a normalized state.
///
/// Returns the reported bit (`true` = '1', odd / erasure) and the normalized
/// post-measurement state.
pub fn parity_measure<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    model: &DetectionErrorModel,
    rng: &mut R,
) -> Result<(bool, DensityMatrix)> {
    let [zero, one] = check_instrument(&rho.space(), model)?;
    let out0 = zero.apply_unnormalized(rho)?;
    let out1 = one.apply_unnormalized(rho)?;
    let (p0, p1) = (out0.trace(), out1.trace());
    if (p0 + p1 - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!(
            "parity outcome probabilities sum to {} (state not normalized)",
            p0 + p1
        )));
    }
    let bit = rng.random::<f64>() < p1;
    let (out, p) = if bit { (out1, p1) } else { (out0, p0) };
    Ok((bit, out.scaled(1.0 / p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{identity_error, Ket};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn instrument_is_complete() {
        let s = FockSpace::new(4).unwrap();
        let [a, b] = check_instrument(&s, &DetectionErrorModel::default()).unwrap();
        let total = a.completeness() + b.completeness();
        assert!(identity_error(&total) < 1e-12);
    }

    #[test]
    fn error_free_parity_is_deterministic_and_qnd() {
        let s = FockSpace::new(4).unwrap();
        let ideal = DetectionErrorModel::ideal();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 0..4 {
            let rho = DensityMatrix::fock(&s, n).unwrap();
            let (b, post) = parity_measure(&rho, &ideal, &mut rng).unwrap();
            assert_eq!(b, n % 2 == 1);
            let (b2, _) = parity_measure(&post, &ideal, &mut rng).unwrap();
            assert_eq!(b, b2);
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mixed = Ket::superposition(&s, &[(0, h.into()), (1, h.into())]).unwrap().to_density();
        for _ in 0..50 {
            let (b, post) = parity_measure(&mixed, &ideal, &mut rng).unwrap();
            let (b2, _) = parity_measure(&post, &ideal, &mut rng).unwrap();
            assert_eq!(b, b2);
        }
    }

    #[test]
    fn induced_dephasing_damps_logical_coherence() {
        let s = FockSpace::new(4).unwrap();
        let model = DetectionErrorModel {
            p_induced_dephasing: 0.1,
            ..DetectionErrorModel::ideal()
        };
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = Ket::superposition(&s, &[(0, h.into()), (2, h.into())]).unwrap().to_density();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (b, post) = parity_measure(&plus, &model, &mut rng).unwrap();
        assert!(!b);
        assert!((post.element(0, 2).re - 0.5 * 0.8).abs() < 1e-14);
        assert!((post.population(2) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn unnormalized_input_is_rejected() {
        let s = FockSpace::new(4).unwrap();
        let rho = DensityMatrix::fock(&s, 0).unwrap().scaled(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(parity_measure(&rho, &DetectionErrorModel::ideal(), &mut rng).is_err());
    }
}
