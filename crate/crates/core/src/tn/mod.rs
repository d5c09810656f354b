//! Charge-conserving tensors and matrix product states.

pub mod block;
pub mod leg;
pub(crate) mod linalg;
pub mod mpo;
pub mod mps;
pub(crate) mod site;
pub mod svd;

pub use block::{BlockKey, BlockTensor};
pub use leg::{ChargeLeg, Direction};
pub use mpo::{Mpo, MpoTerm};
pub use mps::{overlap, MpsState, ThetaTensor};
pub use svd::{block_svd_truncate, entanglement_entropy, SchmidtSpectrum, SvdSplit};
