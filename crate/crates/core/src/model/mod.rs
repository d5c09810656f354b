//! The extended Bose-Hubbard chain and its physical diagnostics.

pub mod diagnostics;
pub mod hamiltonian;
pub mod observables;
pub mod operators;
pub mod params;

pub use diagnostics::{
    charge_gap, correlation_length, fidelity_matrix, fidelity_scan, ChargeGapResult, CorrelationLengthResult,
    FidelityScan,
};
pub use hamiltonian::build_mpo;
pub use observables::{
    correlator_matrix, density_profile, order_parameter, structure_factor, CorrelatorKind, Diagnostics, ObservableSet,
};
pub use params::ModelParams;
