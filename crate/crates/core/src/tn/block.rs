use std::collections::BTreeMap;

use ndarray::{Array2, ArrayD, IxDyn, Slice};

use super::leg::ChargeLeg;
use crate::error::{Error, Result};

/// Sector charge selected on every leg, in leg order.
pub type BlockKey = Vec<i32>;

/// A U(1)-symmetric tensor stored as dense blocks, one per allowed
/// combination of leg sectors.
///
/// A block keyed by `[q_0, q_1, ...]` may only exist when
/// `sum_k sign_k * q_k == total_charge`; blocks that are not stored are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockTensor {
    legs: Vec<ChargeLeg>,
    blocks: BTreeMap<BlockKey, ArrayD<f64>>,
    total_charge: i32,
}

impl BlockTensor {
    /// The zero tensor on the given legs.
    pub fn zeros(legs: Vec<ChargeLeg>, total_charge: i32) -> Self {
        Self { legs, blocks: BTreeMap::new(), total_charge }
    }

    pub fn legs(&self) -> &[ChargeLeg] {
        &self.legs
    }

    pub fn leg(&self, axis: usize) -> &ChargeLeg {
        &self.legs[axis]
    }

    pub fn rank(&self) -> usize {
        self.legs.len()
    }

    pub fn total_charge(&self) -> i32 {
        self.total_charge
    }

    pub fn shape(&self) -> Vec<usize> {
        self.legs.iter().map(ChargeLeg::dim).collect()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&BlockKey, &ArrayD<f64>)> {
        self.blocks.iter()
    }

    pub fn block(&self, key: &[i32]) -> Option<&ArrayD<f64>> {
        self.blocks.get(key)
    }

    /// Whether a block with this key is permitted by the conservation rule.
    pub fn allows(&self, key: &[i32]) -> bool {
        key.len() == self.legs.len()
            && self.legs.iter().zip(key).all(|(leg, &q)| leg.position(q).is_some())
            && self.legs.iter().zip(key).map(|(leg, &q)| leg.sign() * q).sum::<i32>() == self.total_charge
    }

    /// Stores (or replaces) one block after checking charge and shape.
    pub fn insert_block(&mut self, key: BlockKey, data: ArrayD<f64>) -> Result<()> {
        if !self.allows(&key) {
            return Err(Error::Charge(format!(
                "block {key:?} violates conservation (total charge {})",
                self.total_charge
            )));
        }
        let expected: Vec<usize> =
            self.legs.iter().zip(&key).map(|(leg, &q)| leg.sector_dim(q).unwrap()).collect();
        if data.shape() != expected.as_slice() {
            return Err(Error::Shape(format!("block {key:?}: shape {:?}, expected {expected:?}", data.shape())));
        }
        self.blocks.insert(key, data);
        Ok(())
    }

    pub(crate) fn insert_unchecked(&mut self, key: BlockKey, data: ArrayD<f64>) {
        debug_assert!(self.allows(&key));
        self.blocks.insert(key, data);
    }

    pub fn norm(&self) -> f64 {
        self.blocks.values().flat_map(|b| b.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for b in self.blocks.values_mut() {
            b.mapv_inplace(|x| x * factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.values().all(|b| b.iter().all(|x| x.is_finite()))
    }

    /// Scalar value of a rank-0 tensor (zero if the block is absent).
    pub fn scalar(&self) -> Option<f64> {
        if !self.legs.is_empty() {
            return None;
        }
        Some(self.blocks.get(&Vec::new()).map(|b| b[IxDyn(&[])]).unwrap_or(0.0))
    }

    /// Dense array with every leg laid out sector by sector.
    pub fn to_dense(&self) -> ArrayD<f64> {
        let mut out = ArrayD::zeros(IxDyn(&self.shape()));
        for (key, data) in &self.blocks {
            let offsets: Vec<usize> =
                self.legs.iter().zip(key).map(|(leg, &q)| leg.offset(q).unwrap()).collect();
            let mut view = out.slice_each_axis_mut(|ax| {
                let i = ax.axis.index();
                Slice::from(offsets[i]..offsets[i] + data.shape()[i])
            });
            view.assign(data);
        }
        out
    }

    /// Extracts the symmetric part of a dense array. Entries outside allowed
    /// blocks must be below `tol` in magnitude.
    pub fn from_dense(legs: Vec<ChargeLeg>, total_charge: i32, dense: &ArrayD<f64>, tol: f64) -> Result<Self> {
        let shape: Vec<usize> = legs.iter().map(ChargeLeg::dim).collect();
        if dense.shape() != shape.as_slice() {
            return Err(Error::Shape(format!("dense shape {:?}, legs give {shape:?}", dense.shape())));
        }
        let mut out = Self::zeros(legs.clone(), total_charge);
        let mut violation = None;
        for_each_sector_combo(&legs, |key| {
            let offsets: Vec<(usize, usize)> = legs
                .iter()
                .zip(key)
                .map(|(leg, &q)| (leg.offset(q).unwrap(), leg.sector_dim(q).unwrap()))
                .collect();
            let view = dense.slice_each_axis(|ax| {
                let (o, g) = offsets[ax.axis.index()];
                Slice::from(o..o + g)
            });
            if out.allows(key) {
                if view.iter().any(|&x| x != 0.0) {
                    out.blocks.insert(key.to_vec(), view.to_owned());
                }
            } else if let Some(bad) = view.iter().map(|x| x.abs()).find(|&x| x > tol) {
                violation = Some((key.to_vec(), bad));
            }
        });
        if let Some((key, bad)) = violation {
            return Err(Error::Charge(format!("dense entry {bad:e} in forbidden block {key:?}")));
        }
        Ok(out)
    }

    /// Reorders legs: new leg `k` is old leg `axes[k]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        check_permutation(axes, self.rank())?;
        let legs = axes.iter().map(|&a| self.legs[a].clone()).collect();
        let blocks = self
            .blocks
            .iter()
            .map(|(key, data)| {
                let k = axes.iter().map(|&a| key[a]).collect();
                let d = data.view().permuted_axes(IxDyn(axes)).as_standard_layout().into_owned();
                (k, d)
            })
            .collect();
        Ok(Self { legs, blocks, total_charge: self.total_charge })
    }

    /// Contracts `axes_self[k]` with `axes_other[k]` for every `k`.
    ///
    /// Result legs are the free legs of `self` followed by the free legs of
    /// `other`. Paired legs must carry identical sectors with opposite
    /// directions.
    pub fn tensordot(&self, other: &BlockTensor, axes_self: &[usize], axes_other: &[usize]) -> Result<BlockTensor> {
        if axes_self.len() != axes_other.len() {
            return Err(Error::Shape("unequal number of contracted axes".into()));
        }
        check_distinct(axes_self, self.rank())?;
        check_distinct(axes_other, other.rank())?;
        for (&a, &b) in axes_self.iter().zip(axes_other) {
            if !self.legs[a].contracts_with(&other.legs[b]) {
                return Err(Error::Charge(format!("leg {a} cannot contract with leg {b}")));
            }
        }
        let free_a: Vec<usize> = (0..self.rank()).filter(|a| !axes_self.contains(a)).collect();
        let free_b: Vec<usize> = (0..other.rank()).filter(|b| !axes_other.contains(b)).collect();

        let mut legs: Vec<ChargeLeg> = free_a.iter().map(|&a| self.legs[a].clone()).collect();
        legs.extend(free_b.iter().map(|&b| other.legs[b].clone()));
        let out_shape_of = |ka: &[i32], kb: &[i32]| -> Vec<usize> {
            free_a
                .iter()
                .zip(ka)
                .map(|(&a, &q)| self.legs[a].sector_dim(q).unwrap())
                .chain(free_b.iter().zip(kb).map(|(&b, &q)| other.legs[b].sector_dim(q).unwrap()))
                .collect()
        };

        let mut perm_b = axes_other.to_vec();
        perm_b.extend(&free_b);
        let mut grouped: BTreeMap<Vec<i32>, Vec<(Vec<i32>, Array2<f64>)>> = BTreeMap::new();
        for (key, data) in &other.blocks {
            let ckey: Vec<i32> = axes_other.iter().map(|&b| key[b]).collect();
            let fkey: Vec<i32> = free_b.iter().map(|&b| key[b]).collect();
            grouped.entry(ckey).or_default().push((fkey, as_matrix(data, &perm_b, axes_other.len())));
        }

        let mut perm_a = free_a.clone();
        perm_a.extend(axes_self);
        let mut acc: BTreeMap<BlockKey, (Vec<usize>, Array2<f64>)> = BTreeMap::new();
        for (key, data) in &self.blocks {
            let ckey: Vec<i32> = axes_self.iter().map(|&a| key[a]).collect();
            let Some(partners) = grouped.get(&ckey) else { continue };
            let fa: Vec<i32> = free_a.iter().map(|&a| key[a]).collect();
            let ma = as_matrix(data, &perm_a, free_a.len());
            for (fb, mb) in partners {
                let prod = ma.dot(mb);
                let mut out_key = fa.clone();
                out_key.extend(fb);
                match acc.get_mut(&out_key) {
                    Some((_, m)) => *m += &prod,
                    None => {
                        let shape = out_shape_of(&fa, fb);
                        acc.insert(out_key, (shape, prod));
                    }
                }
            }
        }

        let mut out = BlockTensor::zeros(legs, self.total_charge + other.total_charge);
        for (key, (shape, mat)) in acc {
            let data = mat.into_shape_with_order(IxDyn(&shape)).expect("contiguous product");
            out.insert_unchecked(key, data);
        }
        Ok(out)
    }
}

/// Permutes a block and flattens its first `n_rows` axes into rows.
fn as_matrix(data: &ArrayD<f64>, perm: &[usize], n_rows: usize) -> Array2<f64> {
    let p = data.view().permuted_axes(IxDyn(perm));
    let rows: usize = p.shape()[..n_rows].iter().product();
    let cols: usize = p.shape()[n_rows..].iter().product();
    p.as_standard_layout().into_owned().into_shape_with_order((rows, cols)).expect("standard layout")
}

fn check_permutation(axes: &[usize], rank: usize) -> Result<()> {
    if axes.len() != rank {
        return Err(Error::Shape(format!("permutation of length {} for rank {rank}", axes.len())));
    }
    check_distinct(axes, rank)
}

fn check_distinct(axes: &[usize], rank: usize) -> Result<()> {
    let mut seen = vec![false; rank];
    for &a in axes {
        if a >= rank || seen[a] {
            return Err(Error::Shape(format!("invalid axis list {axes:?} for rank {rank}")));
        }
        seen[a] = true;
    }
    Ok(())
}

/// Calls `f` on every combination of sector charges, one per leg.
pub(crate) fn for_each_sector_combo(legs: &[ChargeLeg], mut f: impl FnMut(&[i32])) {
    fn rec(legs: &[ChargeLeg], key: &mut Vec<i32>, f: &mut dyn FnMut(&[i32])) {
        if key.len() == legs.len() {
            f(key);
            return;
        }
        for &q in legs[key.len()].charges() {
            key.push(q);
            rec(legs, key, f);
            key.pop();
        }
    }
    rec(legs, &mut Vec::with_capacity(legs.len()), &mut f);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tn::leg::Direction;
    use ndarray::Array;

    fn leg(charges: &[i32], degs: &[usize], dir: Direction) -> ChargeLeg {
        ChargeLeg::new(charges.to_vec(), degs.to_vec(), dir).unwrap()
    }

    #[test]
    fn insert_checks_conservation_and_shape() {
        let mut t = BlockTensor::zeros(
            vec![leg(&[0, 1], &[1, 2], Direction::In), leg(&[0, 1], &[2, 1], Direction::Out)],
            0,
        );
        assert!(t.insert_block(vec![0, 1], ArrayD::zeros(IxDyn(&[1, 1]))).is_err());
        assert!(t.insert_block(vec![1, 1], ArrayD::zeros(IxDyn(&[1, 1]))).is_err());
        t.insert_block(vec![1, 1], ArrayD::ones(IxDyn(&[2, 1]))).unwrap();
        assert_eq!(t.num_blocks(), 1);
        assert!((t.norm() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn dense_round_trip_and_forbidden_entries() {
        let legs = vec![leg(&[0, 1], &[1, 2], Direction::In), leg(&[0, 1], &[2, 1], Direction::Out)];
        let mut dense = ArrayD::zeros(IxDyn(&[3, 3]));
        dense[[0, 0]] = 1.0;
        dense[[0, 1]] = 2.0;
        dense[[2, 2]] = 3.0;
        let t = BlockTensor::from_dense(legs.clone(), 0, &dense, 0.0).unwrap();
        assert_eq!(t.to_dense(), dense);
        dense[[0, 2]] = 0.5;
        assert!(BlockTensor::from_dense(legs, 0, &dense, 1e-12).is_err());
    }

    #[test]
    fn tensordot_matches_dense_contraction() {
        let a_legs = vec![
            leg(&[0, 1, 2], &[1, 2, 1], Direction::In),
            ChargeLeg::physical(2),
            leg(&[0, 1, 2, 3], &[1, 2, 2, 1], Direction::Out),
        ];
        let mut a = BlockTensor::zeros(a_legs.clone(), 0);
        let mut x = 0.3;
        for_each_sector_combo(&a_legs, |k| {
            if a.allows(k) {
                let shape: Vec<usize> = a_legs.iter().zip(k).map(|(l, &q)| l.sector_dim(q).unwrap()).collect();
                let data = Array::from_shape_fn(IxDyn(&shape), |_| {
                    x = (x * 7.3 + 0.11) % 1.0;
                    x - 0.5
                });
                a.insert_block(k.to_vec(), data).unwrap();
            }
        });
        let b = a.permute(&[2, 1, 0]).unwrap();
        // contract a's right leg with a dual copy: build b_dual with flipped legs
        let b_legs: Vec<ChargeLeg> = b.legs().iter().map(ChargeLeg::dual).collect();
        let b_dual = BlockTensor::from_dense(b_legs, 0, &b.to_dense(), 0.0).unwrap();
        let c = a.tensordot(&b_dual, &[2], &[0]).unwrap();
        let dense = {
            let ad = a.to_dense();
            let bd = b_dual.to_dense();
            let (n0, n1, n2) = (ad.shape()[0], ad.shape()[1], ad.shape()[2]);
            let (m1, m2) = (bd.shape()[1], bd.shape()[2]);
            let mut out = ArrayD::<f64>::zeros(IxDyn(&[n0, n1, m1, m2]));
            for i in 0..n0 {
                for j in 0..n1 {
                    for p in 0..m1 {
                        for q in 0..m2 {
                            out[[i, j, p, q]] = (0..n2).map(|k| ad[[i, j, k]] * bd[[k, p, q]]).sum::<f64>();
                        }
                    }
                }
            }
            out
        };
        let diff = (&c.to_dense() - &dense).iter().fold(0f64, |m, x| m.max(x.abs()));
        assert!(diff < 1e-13, "diff {diff}");
        for (k, _) in c.blocks() {
            assert!(c.allows(k));
        }
    }

    #[test]
    fn full_contraction_gives_scalar() {
        let l = leg(&[0, 1], &[2, 1], Direction::In);
        let mut v = BlockTensor::zeros(vec![l.clone()], 1);
        v.insert_block(vec![1], ArrayD::from_elem(IxDyn(&[1]), 3.0)).unwrap();
        let mut w = BlockTensor::zeros(vec![l.dual()], -1);
        w.insert_block(vec![1], ArrayD::from_elem(IxDyn(&[1]), 2.0)).unwrap();
        let s = v.tensordot(&w, &[0], &[0]).unwrap();
        assert_eq!(s.scalar(), Some(6.0));
    }
}
