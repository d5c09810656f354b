//! The discovery loop on top of the physics: grid sweeps with a persistent
//! ground-state cache, autoencoder inputs, loss maps and phase labeling.

pub mod cache;
pub mod discover;
pub mod export;
pub mod grid;
pub mod input;
pub mod record;
pub mod region;

pub use cache::{CellOutcome, GroundStateCache, SweepSummary};
pub use discover::{
    discover_phases, evaluate_loss_map, hole_study, origin_block, supersolid_probe, train_region, DiscoverConfig,
    Discovery, HolePoint, Iteration, ProbeRow, RegionModel, StopReason, SupersolidThresholds,
};
pub use grid::{Cell, SweepGrid};
pub use input::{extract_input, InputKind};
pub use record::GroundStateRecord;
pub use region::{anomaly_threshold, propose_region, CellMask, LossMap, PhaseLabeling, RegionProposal};
