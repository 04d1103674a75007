//! Single-qubit Clifford randomized benchmarking on the code space with a
//! parity check after every Clifford.

mod clifford;
mod rb;

pub use clifford::{
    clifford_table, compose, compose_elements, equal_up_to_phase, find_element, inverse_element,
    mean_physical_gates, CliffordElement, Primitive,
};
pub use rb::{
    compile_rb_sequence, rb_bootstrap, rb_fit, run_rb, survival_fit, GateNoiseModel, RbData,
    RbFit, RbSequence, SurvivalFit, X_HALF_PER_CLIFFORD,
};
