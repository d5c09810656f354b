use rayon::prelude::*;

use super::input::{extract_input, InputKind};
use super::record::GroundStateRecord;
use super::region::{propose_region, CellMask, LossMap, PhaseLabeling};
use crate::ae::{mean_loss, train, AeModel, ArchConfig, TensorBuffer, TrainConfig, TrainOutcome};
use crate::dmrg::{run_dmrg, DmrgConfig};
use crate::error::{Error, Result};
use crate::model::{structure_factor, ModelParams};

/// Settings of the training / scanning loop.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscoverConfig {
    pub kind: InputKind,
    pub arch: ArchConfig,
    pub train: TrainConfig,
    /// Seed of the initial weights.
    pub model_seed: u64,
    pub max_iterations: usize,
    /// Side of the square first training block at the grid origin.
    pub first_block: usize,
    /// Smallest anomalous component that may become a training region.
    pub min_region_cells: usize,
}

impl Default for DiscoverConfig {
    fn default() -> Self {
        Self {
            kind: InputKind::Es,
            arch: ArchConfig::default(),
            train: TrainConfig::default(),
            model_seed: 0,
            max_iterations: 5,
            first_block: 3,
            min_region_cells: 4,
        }
    }
}

/// A model trained on one region.
#[derive(Clone, Debug)]
pub struct RegionModel {
    pub model: AeModel,
    pub outcome: TrainOutcome,
    /// Converged cells the model was trained on.
    pub cells: Vec<(usize, usize)>,
    /// Region cells left out because their DMRG run was flagged.
    pub skipped: Vec<(usize, usize)>,
    /// Mean loss of the returned model over its training set.
    pub train_loss: f64,
}

fn check_layout(records: &[GroundStateRecord], region: &CellMask) -> Result<()> {
    if records.len() != region.n_u * region.n_v {
        return Err(Error::Shape(format!("{} records for a {}x{} grid", records.len(), region.n_u, region.n_v)));
    }
    for (i, r) in records.iter().enumerate() {
        if r.cell != (i / region.n_v, i % region.n_v) {
            return Err(Error::Shape(format!("record {i} holds cell {:?}; records must be row-major", r.cell)));
        }
    }
    Ok(())
}

/// Trains a fresh standard autoencoder on the converged cells of `region`.
/// `records` is the whole grid in row-major order.
pub fn train_region(records: &[GroundStateRecord], region: &CellMask, cfg: &DiscoverConfig) -> Result<RegionModel> {
    check_layout(records, region)?;
    if region.is_empty() {
        return Err(Error::Refused("empty training region".into()));
    }
    let (mut cells, mut skipped) = (Vec::new(), Vec::new());
    for c in region.cells() {
        if records[c.0 * region.n_v + c.1].converged() {
            cells.push(c);
        } else {
            skipped.push(c);
        }
    }
    if cells.is_empty() {
        return Err(Error::Refused(format!("all {} region cells carry a convergence flag", skipped.len())));
    }
    let data = cells
        .iter()
        .map(|c| extract_input(&records[c.0 * region.n_v + c.1], cfg.kind))
        .collect::<Result<Vec<TensorBuffer>>>()?;
    let shape = data[0].shape().to_vec();
    let init = AeModel::standard(shape, &cfg.arch, cfg.model_seed)?;
    let outcome = train(&init, &data, &cfg.train)?;
    let mut model = outcome.model.clone();
    let train_loss = mean_loss(&model, &data)?;
    model.metadata.insert("input_kind".into(), cfg.kind.name().into());
    model.metadata.insert("train_cells".into(), cells.len().to_string());
    let region_text: Vec<String> = region.cells().iter().map(|(u, v)| format!("{u}:{v}")).collect();
    model.metadata.insert("train_region".into(), region_text.join(" "));
    model.metadata.insert("train_loss".into(), format!("{train_loss:?}"));
    Ok(RegionModel { model, outcome, cells, skipped, train_loss })
}

/// Loss of every cell (in parallel); the training region is carried along.
pub fn evaluate_loss_map(
    model: &AeModel,
    records: &[GroundStateRecord],
    train_region: &CellMask,
    kind: InputKind,
) -> Result<LossMap> {
    check_layout(records, train_region)?;
    let losses = records
        .par_iter()
        .map(|r| {
            let x = extract_input(r, kind)?;
            if x.shape() != model.input_shape() {
                return Err(Error::Refused(format!(
                    "cell {:?} exports {:?}, model expects {:?}",
                    r.cell,
                    x.shape(),
                    model.input_shape()
                )));
            }
            model.loss(&x)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(LossMap {
        n_u: train_region.n_u,
        n_v: train_region.n_v,
        losses,
        train_region: train_region.clone(),
        kind,
        checkpoint: None,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    /// No anomalous component is left.
    Exhausted,
    MaxIterations,
    /// A proposal repeated an earlier training region.
    Oscillation { iteration: usize },
}

/// One pass of the loop.
#[derive(Clone, Debug)]
pub struct Iteration {
    pub region: CellMask,
    pub model: AeModel,
    pub train_loss: f64,
    pub loss_map: LossMap,
    pub threshold: f64,
    pub newly_labeled: usize,
}

#[derive(Clone, Debug)]
pub struct Discovery {
    pub labeling: PhaseLabeling,
    pub iterations: Vec<Iteration>,
    pub stop: StopReason,
}

/// First training region: the `k x k` block at the grid origin.
pub fn origin_block(n_u: usize, n_v: usize, k: usize) -> CellMask {
    CellMask::rect(n_u, n_v, (0, k.max(1) - 1), (0, k.max(1) - 1))
}

/// Train, scan, label everything at or below the threshold, propose the
/// next region from what is left; repeat. Iteration `k` (from 1) assigns
/// phase label `k`.
pub fn discover_phases(
    records: &[GroundStateRecord],
    n_u: usize,
    n_v: usize,
    cfg: &DiscoverConfig,
    mut on_iteration: impl FnMut(&Iteration),
) -> Result<Discovery> {
    let mut labeling = PhaseLabeling::new(n_u, n_v);
    let mut region = origin_block(n_u, n_v, cfg.first_block);
    let mut iterations: Vec<Iteration> = Vec::new();
    let mut stop = StopReason::MaxIterations;
    for it in 0..cfg.max_iterations {
        if iterations.iter().any(|p| p.region == region) {
            stop = StopReason::Oscillation { iteration: it };
            break;
        }
        let trained = train_region(records, &region, cfg)?;
        let loss_map = evaluate_loss_map(&trained.model, records, &region, cfg.kind)?;
        let threshold = loss_map.threshold()?;
        let newly_labeled = labeling.assign(&loss_map, threshold, it as u32 + 1, it + 1);
        let proposal = propose_region(&loss_map, &labeling, threshold, cfg.min_region_cells);
        let step =
            Iteration { region, model: trained.model, train_loss: trained.train_loss, loss_map, threshold, newly_labeled };
        on_iteration(&step);
        iterations.push(step);
        if proposal.is_empty() {
            stop = StopReason::Exhausted;
            break;
        }
        region = proposal.region;
    }
    Ok(Discovery { labeling, iterations, stop })
}

/// Thresholds above which a cell counts as a supersolid candidate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupersolidThresholds {
    pub o_sf: f64,
    pub o_dw: f64,
    pub s: f64,
}

impl Default for SupersolidThresholds {
    fn default() -> Self {
        Self { o_sf: 0.05, o_dw: 0.05, s: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeRow {
    pub cell: (usize, usize),
    pub u: f64,
    pub v: f64,
    pub o_sf: f64,
    pub o_dw: f64,
    pub s: f64,
    pub converged: bool,
    pub candidate: bool,
}

/// Order parameters and structure factor of every cell in `region`.
pub fn supersolid_probe(records: &[GroundStateRecord], region: &CellMask, th: &SupersolidThresholds) -> Result<Vec<ProbeRow>> {
    check_layout(records, region)?;
    Ok(region
        .cells()
        .into_iter()
        .map(|c| {
            let r = &records[c.0 * region.n_v + c.1];
            let o = &r.observables;
            ProbeRow {
                cell: c,
                u: r.u,
                v: r.v,
                o_sf: o.o_sf,
                o_dw: o.o_dw,
                s: o.structure_factor,
                converged: r.converged(),
                candidate: r.converged() && o.o_sf > th.o_sf && o.o_dw > th.o_dw && o.structure_factor > th.s,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolePoint {
    pub holes: usize,
    pub structure_factor: f64,
    pub energy: f64,
    pub converged: bool,
}

/// Structure factor at `N = L - h` for `h = 0..=max_holes` (in parallel).
pub fn hole_study(params: &ModelParams, dmrg: &DmrgConfig, max_holes: usize) -> Result<Vec<HolePoint>> {
    if max_holes >= params.length {
        return Err(Error::Domain(format!("{max_holes} holes on {} sites", params.length)));
    }
    (0..=max_holes)
        .into_par_iter()
        .map(|h| {
            let n = (params.length - h) as i32;
            let (state, report) = run_dmrg(params, dmrg, n, None)?;
            let density = crate::model::density_profile(&state)?;
            let (s, _) = structure_factor(&density)?;
            Ok(HolePoint { holes: h, structure_factor: s, energy: report.final_energy, converged: report.converged })
        })
        .collect()
}
