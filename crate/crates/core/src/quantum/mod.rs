//! Truncated |n l m⟩ basis, the unperturbed spectrum, the operator matrix
//! elements and the time-dependent coupling matrix.

mod basis;
mod elements;
mod interaction;
pub mod phase;
mod spectrum;

pub use basis::{build_basis, k_class, Basis, BasisIndex};
pub use elements::{
    ang_element, clm, vib_cos_sqrt, vib_cos_sym, vib_sin_sqrt, vib_sin_sym, vib_sqrt_cos,
    vib_sqrt_sin, AngularOp,
};
pub use interaction::{
    couplings, interaction_matrix, interaction_matrix_composed, write_matrix_coo, Coupling,
    Direction, InteractionMatrix,
};
pub use spectrum::{energy, n_bound};
