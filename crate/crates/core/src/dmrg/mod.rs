//! Finite-chain DMRG, its Lanczos eigensolver and the exact-diagonalization
//! oracle it is validated against.

pub mod config;
pub mod ed;
pub mod engine;
pub mod lanczos;

pub use config::{ConvergenceReport, DmrgConfig};
pub use ed::{exact_diag_oracle, DenseState, SectorBasis, SectorHamiltonian};
pub use engine::{initial_occupations, run_dmrg, run_dmrg_mpo};
pub use lanczos::{lanczos_ground, LanczosResult};
