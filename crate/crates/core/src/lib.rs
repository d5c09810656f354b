//! Ground states of the one-dimensional extended Bose-Hubbard chain and
//! unsupervised phase discovery on top of them.
//!
//! The crate is layered bottom-up:
//!
//! * [`tn`]: U(1) block-sparse tensors and matrix product states in Vidal form.
//! * [`dmrg`]: two-site finite DMRG, a Lanczos eigensolver and an exact
//!   diagonalization oracle.
//! * [`model`]: the Hamiltonian as an MPO and all physical diagnostics
//!   (correlators, order parameters, structure factor, charge gap,
//!   correlation length, fidelity).
//! * [`ae`]: a small convolutional autoencoder with shortcut connections,
//!   written from scratch with reverse-mode gradients and an Adam trainer.
//! * [`pipeline`]: grid sweeps with an on-disk ground-state cache, region
//!   training, loss maps and iterative phase labeling.
//! * [`cli`]: configuration parsing and the `phasescout` subcommands.

pub mod ae;
mod binio;
pub mod cli;
pub mod dmrg;
mod error;
pub mod model;
pub mod pipeline;
pub mod tn;

pub use error::{Error, Result};
