use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array2, IxDyn};

use super::block::{BlockKey, BlockTensor};
use super::leg::{ChargeLeg, Direction};
use super::linalg::svd_sorted;
use crate::error::{Error, Result};

/// Singular values below this (relative to the norm) are always dropped.
pub const SV_MIN: f64 = 1e-12;

const NORM_TOL: f64 = 1e-10;

/// Schmidt values of one bipartition with the U(1) sector of each value.
///
/// Values are sorted in descending order. Within a sector, the order of the
/// values is the order of the basis states on the bond leg.
#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtSpectrum {
    values: Vec<f64>,
    sectors: Vec<i32>,
}

impl SchmidtSpectrum {
    pub fn new(values: Vec<f64>, sectors: Vec<i32>) -> Result<Self> {
        if values.len() != sectors.len() {
            return Err(Error::Shape("values and sector labels differ in length".into()));
        }
        if values.is_empty() {
            return Err(Error::Invariant("empty Schmidt spectrum".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Invariant("Schmidt values must be finite and non-negative".into()));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Invariant("Schmidt values must be descending".into()));
        }
        Ok(Self { values, sectors })
    }

    /// The spectrum `(1)` of an unentangled cut carrying `charge`.
    pub fn trivial(charge: i32) -> Self {
        Self { values: vec![1.0], sectors: vec![charge] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sectors(&self) -> &[i32] {
        &self.sectors
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_squared() - 1.0).abs() <= NORM_TOL
    }

    /// Bond leg whose sectors and degeneracies match this spectrum.
    pub fn leg(&self, direction: Direction) -> ChargeLeg {
        ChargeLeg::from_sectors(self.sectors.iter().map(|&q| (q, 1)), direction)
            .expect("non-empty spectrum gives a valid leg")
    }

    /// Values of one sector in basis order.
    pub fn sector_values(&self, charge: i32) -> Vec<f64> {
        self.values.iter().zip(&self.sectors).filter(|(_, &q)| q == charge).map(|(&v, _)| v).collect()
    }

    /// Values per sector, each in basis order.
    pub fn by_sector(&self) -> BTreeMap<i32, Vec<f64>> {
        let mut out: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
        for (&v, &q) in self.values.iter().zip(&self.sectors) {
            out.entry(q).or_default().push(v);
        }
        out
    }

    /// Values zero-padded (or cut) to exactly `len` entries.
    pub fn padded(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (o, v) in out.iter_mut().zip(&self.values) {
            *o = *v;
        }
        out
    }
}

/// Von Neumann entropy `-sum l^2 log2 l^2` of a normalized spectrum.
pub fn entanglement_entropy(spectrum: &SchmidtSpectrum) -> Result<f64> {
    if !spectrum.is_normalized() {
        return Err(Error::Invariant(format!(
            "spectrum not normalized: sum of squares {}",
            spectrum.norm_squared()
        )));
    }
    let s = spectrum
        .values
        .iter()
        .map(|v| v * v)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum::<f64>();
    Ok(s.max(0.0))
}

/// One candidate singular value: its sector, its rank inside the sector and
/// its magnitude.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Candidate {
    pub charge: i32,
    pub index: usize,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct Selection {
    /// Kept values, globally sorted, renormalized to unit norm.
    pub kept: Vec<Candidate>,
    /// Weight of dropped values relative to the total norm.
    pub discarded_weight: f64,
}

impl Selection {
    /// Number of kept states per sector.
    pub fn counts(&self) -> BTreeMap<i32, usize> {
        let mut out = BTreeMap::new();
        for c in &self.kept {
            *out.entry(c.charge).or_insert(0) += 1;
        }
        out
    }

    pub fn spectrum(&self) -> SchmidtSpectrum {
        SchmidtSpectrum {
            values: self.kept.iter().map(|c| c.value).collect(),
            sectors: self.kept.iter().map(|c| c.charge).collect(),
        }
    }
}

/// Picks the globally largest singular values across all sectors.
///
/// Ordering is by value, then charge, then in-sector index, so a degenerate
/// multiplet straddling `chi_max` is cut the same way on every run.
pub(crate) fn select_kept(mut cands: Vec<Candidate>, chi_max: usize, sv_min: f64) -> Result<Selection> {
    let total: f64 = cands.iter().map(|c| c.value * c.value).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateTensor);
    }
    let norm = total.sqrt();
    for c in &mut cands {
        c.value /= norm;
    }
    cands.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.charge.cmp(&b.charge)).then(a.index.cmp(&b.index)));
    let above = cands.iter().take_while(|c| c.value >= sv_min).count();
    let n = above.min(chi_max.max(1));
    let discarded_weight = cands[n..].iter().map(|c| c.value * c.value).sum::<f64>();
    cands.truncate(n);
    let kept_norm = cands.iter().map(|c| c.value * c.value).sum::<f64>().sqrt();
    for c in &mut cands {
        c.value /= kept_norm;
    }
    Ok(Selection { kept: cands, discarded_weight })
}

/// Result of splitting a tensor across a bond.
#[derive(Clone, Debug)]
pub struct SvdSplit {
    /// Row legs plus a new outgoing bond leg; left-isometric.
    pub left: BlockTensor,
    /// Kept Schmidt values, renormalized.
    pub spectrum: SchmidtSpectrum,
    /// New incoming bond leg plus column legs; right-isometric.
    pub right: BlockTensor,
    /// Sum of dropped squared singular values (input normalized first).
    pub discarded_weight: f64,
}

/// Splits `theta` between its first `n_row_legs` legs and the rest with a
/// sector-by-sector SVD, keeping at most `chi_max` values globally.
///
/// The new bond carries the net charge of the row legs, so for MPS tensors
/// it is the cumulative particle number to the left of the cut.
pub fn block_svd_truncate(theta: &BlockTensor, n_row_legs: usize, chi_max: usize, sv_min: f64) -> Result<SvdSplit> {
    if n_row_legs == 0 || n_row_legs >= theta.rank() {
        return Err(Error::Domain(format!("cannot split rank {} after {n_row_legs} legs", theta.rank())));
    }
    if chi_max == 0 {
        return Err(Error::Domain("chi_max must be at least 1".into()));
    }
    if !theta.is_finite() {
        return Err(Error::Domain("tensor has non-finite entries".into()));
    }
    let legs = theta.legs();
    let dims_of = |key: &[i32], offset: usize| -> Vec<usize> {
        key.iter().enumerate().map(|(i, &q)| legs[offset + i].sector_dim(q).unwrap()).collect()
    };

    // Sector q -> (row keys, col keys) present in the tensor.
    let mut sectors: BTreeMap<i32, (BTreeSet<BlockKey>, BTreeSet<BlockKey>)> = BTreeMap::new();
    for (key, _) in theta.blocks() {
        let q: i32 = legs[..n_row_legs].iter().zip(key).map(|(l, &c)| l.sign() * c).sum();
        let e = sectors.entry(q).or_default();
        e.0.insert(key[..n_row_legs].to_vec());
        e.1.insert(key[n_row_legs..].to_vec());
    }
    if sectors.is_empty() {
        return Err(Error::DegenerateTensor);
    }

    struct Sector {
        rows: Vec<(BlockKey, usize, usize)>,
        cols: Vec<(BlockKey, usize, usize)>,
        u: Array2<f64>,
        vt: Array2<f64>,
    }
    let mut decomposed: BTreeMap<i32, Sector> = BTreeMap::new();
    let mut cands = Vec::new();
    for (q, (row_keys, col_keys)) in sectors {
        let layout = |keys: BTreeSet<BlockKey>, offset: usize| {
            let mut pos = 0;
            keys.into_iter()
                .map(|k| {
                    let size: usize = dims_of(&k, offset).iter().product();
                    let entry = (k, pos, size);
                    pos += size;
                    entry
                })
                .collect::<Vec<_>>()
        };
        let rows = layout(row_keys, 0);
        let cols = layout(col_keys, n_row_legs);
        let nr = rows.last().map(|r| r.1 + r.2).unwrap();
        let nc = cols.last().map(|c| c.1 + c.2).unwrap();
        let mut m = Array2::zeros((nr, nc));
        for (rk, ro, rs) in &rows {
            for (ck, co, cs) in &cols {
                let mut key = rk.clone();
                key.extend(ck);
                if let Some(block) = theta.block(&key) {
                    let flat = block.as_standard_layout();
                    let flat = flat.as_slice().unwrap();
                    for i in 0..*rs {
                        for j in 0..*cs {
                            m[[ro + i, co + j]] = flat[i * cs + j];
                        }
                    }
                }
            }
        }
        let (u, s, vt) = svd_sorted(m.view());
        cands.extend(s.iter().enumerate().map(|(index, &value)| Candidate { charge: q, index, value }));
        decomposed.insert(q, Sector { rows, cols, u, vt });
    }

    let sel = select_kept(cands, chi_max, sv_min)?;
    let counts = sel.counts();
    let bond = ChargeLeg::from_sectors(counts.iter().map(|(&q, &n)| (q, n)), Direction::Out)?;

    let mut left_legs: Vec<ChargeLeg> = legs[..n_row_legs].to_vec();
    left_legs.push(bond.clone());
    let mut right_legs = vec![bond.dual()];
    right_legs.extend(legs[n_row_legs..].iter().cloned());
    let mut left = BlockTensor::zeros(left_legs, 0);
    let mut right = BlockTensor::zeros(right_legs, theta.total_charge());

    for (q, &k) in &counts {
        let sec = &decomposed[q];
        for (rk, ro, rs) in &sec.rows {
            let mut shape = dims_of(rk, 0);
            shape.push(k);
            let data = Array2::from_shape_fn((*rs, k), |(i, j)| sec.u[[ro + i, j]]);
            let mut key = rk.clone();
            key.push(*q);
            left.insert_unchecked(key, data.into_shape_with_order(IxDyn(&shape)).unwrap());
        }
        for (ck, co, cs) in &sec.cols {
            let mut shape = vec![k];
            shape.extend(dims_of(ck, n_row_legs));
            let data = Array2::from_shape_fn((k, *cs), |(i, j)| sec.vt[[i, co + j]]);
            let mut key = vec![*q];
            key.extend(ck);
            right.insert_unchecked(key, data.into_shape_with_order(IxDyn(&shape)).unwrap());
        }
    }

    Ok(SvdSplit { left, spectrum: sel.spectrum(), right, discarded_weight: sel.discarded_weight })
}
