//! Convolutional autoencoder with additive shortcut connections.
//!
//! Everything runs on single samples of shape `(C, N)` or `(C, H, W)`;
//! mini-batches only average gradients.

pub mod checkpoint;
pub mod layers;
pub mod model;
pub mod tensor;
pub mod train;

pub use layers::{Layer, LayerKind, LayerSpec};
pub use model::{AeModel, ArchConfig, ForwardCache, Gradients, ShortcutMode};
pub use tensor::{reconstruction_loss, TensorBuffer};
pub use train::{mean_loss, train, TrainConfig, TrainOutcome};
