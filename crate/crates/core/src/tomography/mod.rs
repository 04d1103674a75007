//! Wigner sampling, minimal-point logical reconstruction, constrained state
//! fitting and qutrit process tomography.

mod mle;
mod process;
mod wigner;

pub use mle::{mle_state, mle_state_with, subspace_levels, MleCost, MleOptions, MleResult};
pub use process::{
    chi_from_kraus, process_fidelity, process_tomography, process_tomography_inputs,
    qutrit_basis, reduced_logical_chi, state_fidelity, ChiBasis, ChiMatrix,
};
pub use wigner::{
    eight_point_alphas, five_point_alphas, ideal_samples, logical_paulis_from_parity,
    parity_expectation, projected_parity, read_wigner_samples_csv, sampled_parities, wigner,
    LogicalPaulis, WignerSample, PARITY_CUTOFF_FLOOR,
};
