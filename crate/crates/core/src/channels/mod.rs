//! Photon-loss Kraus maps, Lindblad evolution and the dispersive Hamiltonian.

mod kraus;
mod lindblad;
mod params;

pub use kraus::{apply_channel, photon_loss_kraus, KrausChannel, SuperOperator};
pub use lindblad::{
    dephasing_collapse_op, dispersive_hamiltonian, lindblad_evolve, lindblad_evolve_exact,
    thermal_loss_collapse_ops, CollapseOp, LindbladSpec, EXACT_MAX_DIM, MAX_STEP_SCALE,
};
pub use params::{angular, KerrSign, SystemParams};
