//! Loss maps over the grid, anomaly thresholds and region proposals.

use super::grid::Cell;
use super::input::InputKind;
use crate::error::{Error, Result};

/// Per-cell boolean mask over an `n_u x n_v` grid, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CellMask {
    pub n_u: usize,
    pub n_v: usize,
    pub bits: Vec<bool>,
}

impl CellMask {
    pub fn empty(n_u: usize, n_v: usize) -> Self {
        Self { n_u, n_v, bits: vec![false; n_u * n_v] }
    }

    pub fn from_cells(n_u: usize, n_v: usize, cells: &[Cell]) -> Self {
        let mut m = Self::empty(n_u, n_v);
        for &c in cells {
            m.set(c, true);
        }
        m
    }

    /// Cells `iu0..=iu1` x `iv0..=iv1`.
    pub fn rect(n_u: usize, n_v: usize, (iu0, iu1): (usize, usize), (iv0, iv1): (usize, usize)) -> Self {
        let mut m = Self::empty(n_u, n_v);
        for iu in iu0..=iu1.min(n_u - 1) {
            for iv in iv0..=iv1.min(n_v - 1) {
                m.set((iu, iv), true);
            }
        }
        m
    }

    pub fn get(&self, (iu, iv): Cell) -> bool {
        self.bits[iu * self.n_v + iv]
    }

    pub fn set(&mut self, (iu, iv): Cell, on: bool) {
        self.bits[iu * self.n_v + iv] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn cells(&self) -> Vec<Cell> {
        (0..self.bits.len()).filter(|&i| self.bits[i]).map(|i| (i / self.n_v, i % self.n_v)).collect()
    }

    /// Inclusive `((iu0, iu1), (iv0, iv1))`.
    pub fn bounding_box(&self) -> Option<((usize, usize), (usize, usize))> {
        let cells = self.cells();
        let first = cells.first()?;
        let mut b = ((first.0, first.0), (first.1, first.1));
        for &(u, v) in &cells {
            b.0 .0 = b.0 .0.min(u);
            b.0 .1 = b.0 .1.max(u);
            b.1 .0 = b.1 .0.min(v);
            b.1 .1 = b.1 .1.max(v);
        }
        Some(b)
    }
}

/// Reconstruction loss of every cell under one model.
#[derive(Clone, Debug, PartialEq)]
pub struct LossMap {
    pub n_u: usize,
    pub n_v: usize,
    /// Row-major losses.
    pub losses: Vec<f64>,
    pub train_region: CellMask,
    pub kind: InputKind,
    /// Where the model that produced this map was saved, if anywhere.
    pub checkpoint: Option<String>,
}

impl LossMap {
    pub fn loss(&self, (iu, iv): Cell) -> f64 {
        self.losses[iu * self.n_v + iv]
    }

    pub fn losses_in(&self, mask: &CellMask) -> Vec<f64> {
        mask.cells().into_iter().map(|c| self.loss(c)).collect()
    }

    pub fn median_in(&self, mask: &CellMask) -> Option<f64> {
        median(&self.losses_in(mask))
    }

    /// Training-region median plus three median absolute deviations.
    pub fn threshold(&self) -> Result<f64> {
        anomaly_threshold(&self.losses_in(&self.train_region))
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// `median + 3 MAD`.
pub fn anomaly_threshold(values: &[f64]) -> Result<f64> {
    let m = median(values).ok_or_else(|| Error::Refused("threshold of an empty training region".into()))?;
    let dev: Vec<f64> = values.iter().map(|x| (x - m).abs()).collect();
    Ok(m + 3.0 * median(&dev).expect("nonempty"))
}

/// Phase id per cell with the iteration that assigned it.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseLabeling {
    pub n_u: usize,
    pub n_v: usize,
    pub labels: Vec<Option<u32>>,
    pub provenance: Vec<Option<usize>>,
    /// Threshold used by each iteration.
    pub thresholds: Vec<f64>,
}

impl PhaseLabeling {
    pub fn new(n_u: usize, n_v: usize) -> Self {
        Self { n_u, n_v, labels: vec![None; n_u * n_v], provenance: vec![None; n_u * n_v], thresholds: Vec::new() }
    }

    pub fn label(&self, (iu, iv): Cell) -> Option<u32> {
        self.labels[iu * self.n_v + iv]
    }

    pub fn iteration(&self, (iu, iv): Cell) -> Option<usize> {
        self.provenance[iu * self.n_v + iv]
    }

    pub fn unassigned(&self) -> CellMask {
        CellMask { n_u: self.n_u, n_v: self.n_v, bits: self.labels.iter().map(Option::is_none).collect() }
    }

    pub fn unassigned_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    /// Labels cells that are unassigned and either in the training region or
    /// at or below the threshold. Returns how many cells were labeled.
    pub fn assign(&mut self, map: &LossMap, threshold: f64, label: u32, iteration: usize) -> usize {
        let mut n = 0;
        for i in 0..self.labels.len() {
            if self.labels[i].is_none() && (map.train_region.bits[i] || map.losses[i] <= threshold) {
                self.labels[i] = Some(label);
                self.provenance[i] = Some(iteration);
                n += 1;
            }
        }
        self.thresholds.push(threshold);
        n
    }
}

/// Next training region and how it was found.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionProposal {
    /// Empty when no component qualifies: the search is complete.
    pub region: CellMask,
    /// The full component the region was cut from.
    pub component: CellMask,
    pub threshold: f64,
    /// `size / variance` of the chosen component.
    pub score: f64,
}

impl RegionProposal {
    pub fn is_empty(&self) -> bool {
        self.region.is_empty()
    }
}

/// 4-connected components of a mask, each as a list of cells in row-major
/// order; components are ordered by their first cell.
pub fn connected_components(mask: &CellMask) -> Vec<Vec<Cell>> {
    let mut seen = vec![false; mask.bits.len()];
    let mut out = Vec::new();
    for start in mask.cells() {
        let idx = start.0 * mask.n_v + start.1;
        if seen[idx] {
            continue;
        }
        seen[idx] = true;
        let mut stack = vec![start];
        let mut comp = Vec::new();
        while let Some((u, v)) = stack.pop() {
            comp.push((u, v));
            let mut nb = Vec::with_capacity(4);
            if u > 0 {
                nb.push((u - 1, v));
            }
            if u + 1 < mask.n_u {
                nb.push((u + 1, v));
            }
            if v > 0 {
                nb.push((u, v - 1));
            }
            if v + 1 < mask.n_v {
                nb.push((u, v + 1));
            }
            for c in nb {
                let i = c.0 * mask.n_v + c.1;
                if mask.bits[i] && !seen[i] {
                    seen[i] = true;
                    stack.push(c);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Finds the most homogeneous large anomalous area among unassigned cells.
///
/// Cells above `threshold` that are still unassigned form 4-connected
/// components; components smaller than `min_cells` are ignored. The one
/// with the largest `size / variance(loss)` wins (ties: first in row-major
/// order). Its bounding box is shrunk by one cell on every side that spans
/// at least three cells, and the region is the component restricted to it.
pub fn propose_region(map: &LossMap, labeling: &PhaseLabeling, threshold: f64, min_cells: usize) -> RegionProposal {
    let mut anomalous = labeling.unassigned();
    for (i, b) in anomalous.bits.iter_mut().enumerate() {
        *b = *b && map.losses[i] > threshold;
    }
    let empty = CellMask::empty(map.n_u, map.n_v);
    let mut best: Option<(f64, Vec<Cell>)> = None;
    for comp in connected_components(&anomalous) {
        if comp.len() < min_cells.max(1) {
            continue;
        }
        let ls: Vec<f64> = comp.iter().map(|&c| map.loss(c)).collect();
        let mean = ls.iter().sum::<f64>() / ls.len() as f64;
        let var = ls.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / ls.len() as f64;
        let score = if var > 0.0 { comp.len() as f64 / var } else { f64::INFINITY };
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, comp));
        }
    }
    let Some((score, comp)) = best else {
        return RegionProposal { region: empty.clone(), component: empty, threshold, score: 0.0 };
    };
    let component = CellMask::from_cells(map.n_u, map.n_v, &comp);
    let ((u0, u1), (v0, v1)) = component.bounding_box().expect("nonempty");
    let shrink = |a: usize, b: usize| if b >= a + 2 { (a + 1, b - 1) } else { (a, b) };
    let ((u0, u1), (v0, v1)) = (shrink(u0, u1), shrink(v0, v1));
    let mut region = component.clone();
    for (u, v) in comp {
        if u < u0 || u > u1 || v < v0 || v > v1 {
            region.set((u, v), false);
        }
    }
    if region.is_empty() {
        region = component.clone();
    }
    RegionProposal { region, component, threshold, score }
}
