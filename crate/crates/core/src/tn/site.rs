//! Matrix view of one MPS site tensor, split by (left charge, occupation),
//! and left-to-right transfer environments built from it.
//!
//! Every algorithm that walks along the chain works on this form; the public
//! `BlockTensor` is converted at the boundary.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis, IxDyn};

use super::block::BlockTensor;
use super::leg::{ChargeLeg, Direction};
use crate::error::{Error, Result};

/// Site tensor as a set of matrices `M[(q_left, sigma)]` of shape
/// `(D_left(q_left), D_right(q_left + sigma))`. Missing entries are zero.
#[derive(Clone, Debug)]
pub(crate) struct SiteMatrices {
    pub left: ChargeLeg,
    pub right: ChargeLeg,
    pub d: usize,
    pub mats: BTreeMap<(i32, usize), Array2<f64>>,
}

impl SiteMatrices {
    pub fn new(left: ChargeLeg, right: ChargeLeg, d: usize) -> Self {
        Self { left, right, d, mats: BTreeMap::new() }
    }

    /// Reads a rank-3 tensor with legs (left In, physical In, right Out).
    pub fn from_block(t: &BlockTensor) -> Result<Self> {
        if t.rank() != 3 || t.leg(1).direction() != Direction::In || t.leg(2).direction() != Direction::Out {
            return Err(Error::Shape("site tensor needs legs (left in, physical in, right out)".into()));
        }
        let d = t.leg(1).dim();
        let mut out = Self::new(t.leg(0).clone(), t.leg(2).clone(), d);
        for (key, data) in t.blocks() {
            let sigma = t.leg(1).offset(key[1]).unwrap();
            let m = data.index_axis(Axis(1), 0).to_owned().into_dimensionality().expect("rank 2");
            out.mats.insert((key[0], sigma), m);
        }
        Ok(out)
    }

    pub fn to_block(&self) -> BlockTensor {
        let phys = ChargeLeg::physical(self.d);
        let mut t = BlockTensor::zeros(vec![self.left.clone(), phys, self.right.clone()], 0);
        for (&(q, s), m) in &self.mats {
            let (r, c) = m.dim();
            let data = m.clone().into_shape_with_order(IxDyn(&[r, 1, c])).unwrap();
            t.insert_unchecked(vec![q, s as i32, q + s as i32], data);
        }
        t
    }

    /// Multiplies every block from the left by `diag(w[q_left])`.
    pub fn scale_rows(&mut self, w: &BTreeMap<i32, Vec<f64>>) {
        for (&(q, _), m) in self.mats.iter_mut() {
            let wq = &w[&q];
            for (mut row, &x) in m.rows_mut().into_iter().zip(wq) {
                row *= x;
            }
        }
    }

    /// Multiplies every block from the right by `diag(w[q_right])`.
    pub fn scale_cols(&mut self, w: &BTreeMap<i32, Vec<f64>>) {
        for (&(q, s), m) in self.mats.iter_mut() {
            let wq = &w[&(q + s as i32)];
            for (mut col, &x) in m.columns_mut().into_iter().zip(wq) {
                col *= x;
            }
        }
    }

    pub fn norm_squared(&self) -> f64 {
        self.mats.values().flat_map(|m| m.iter()).map(|x| x * x).sum()
    }
}

/// Transfer environment on one bond: `(q_bra, q_ket) -> (D_bra, D_ket)`.
pub(crate) type Env = BTreeMap<(i32, i32), Array2<f64>>;

/// Environment of the empty left block at charge `q`.
pub(crate) fn unit_env(q: i32) -> Env {
    let mut e = Env::new();
    e.insert((q, q), Array2::eye(1));
    e
}

/// Identity environment on a bond leg, one block per sector.
pub(crate) fn identity_env(leg: &ChargeLeg) -> Env {
    leg.sectors().map(|(q, g)| ((q, q), Array2::eye(g))).collect()
}

/// Pushes a left environment one site to the right through `op`
/// (`op[[s_bra, s_ket]]`).
pub(crate) fn transfer(env: &Env, bra: &SiteMatrices, ket: &SiteMatrices, op: ArrayView2<f64>) -> Env {
    let mut out = Env::new();
    for (&(qb, qk), e) in env {
        for sk in 0..ket.d {
            let Some(mk) = ket.mats.get(&(qk, sk)) else { continue };
            let mut t: Option<Array2<f64>> = None;
            for sb in 0..bra.d {
                let w = op[[sb, sk]];
                if w == 0.0 {
                    continue;
                }
                let Some(mb) = bra.mats.get(&(qb, sb)) else { continue };
                let t = t.get_or_insert_with(|| e.dot(mk));
                let mut contrib = mb.t().dot(t);
                if w != 1.0 {
                    contrib *= w;
                }
                let key = (qb + sb as i32, qk + sk as i32);
                match out.get_mut(&key) {
                    Some(acc) => *acc += &contrib,
                    None => {
                        out.insert(key, contrib);
                    }
                }
            }
        }
    }
    out
}

/// Closes a left environment against an identity on the right bond.
pub(crate) fn close(env: &Env) -> f64 {
    env.iter().filter(|((qb, qk), _)| qb == qk).map(|(_, e)| e.diag().sum()).sum()
}

/// Value of `<bra| op_j |ket>` completed at site `j` without building the
/// next environment: `sum op[sb,sk] tr(M_b^T E M_k)`.
pub(crate) fn close_with(env: &Env, bra: &SiteMatrices, ket: &SiteMatrices, op: ArrayView2<f64>) -> f64 {
    let mut total = 0.0;
    for (&(qb, qk), e) in env {
        for sk in 0..ket.d {
            let Some(mk) = ket.mats.get(&(qk, sk)) else { continue };
            let mut t: Option<Array2<f64>> = None;
            for sb in 0..bra.d {
                let w = op[[sb, sk]];
                if w == 0.0 || qb + sb as i32 != qk + sk as i32 {
                    continue;
                }
                let Some(mb) = bra.mats.get(&(qb, sb)) else { continue };
                let t = t.get_or_insert_with(|| e.dot(mk));
                total += w * (mb * &*t).sum();
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn block_round_trip() {
        let left = ChargeLeg::new(vec![0, 1], vec![1, 2], Direction::In).unwrap();
        let right = ChargeLeg::new(vec![1, 2], vec![2, 1], Direction::Out).unwrap();
        let mut s = SiteMatrices::new(left, right, 2);
        s.mats.insert((0, 1), array![[1.0, 2.0]]);
        s.mats.insert((1, 0), array![[3.0, 4.0], [5.0, 6.0]]);
        s.mats.insert((1, 1), array![[7.0], [8.0]]);
        let b = s.to_block();
        let back = SiteMatrices::from_block(&b).unwrap();
        assert_eq!(back.mats, s.mats);
        assert!((b.norm().powi(2) - s.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn transfer_of_product_site() {
        let left = ChargeLeg::trivial(0, Direction::In);
        let right = ChargeLeg::trivial(2, Direction::Out);
        let mut s = SiteMatrices::new(left, right, 3);
        s.mats.insert((0, 2), array![[1.0]]);
        let n = Array2::from_diag(&ndarray::arr1(&[0.0, 1.0, 2.0]));
        let e = transfer(&unit_env(0), &s, &s, n.view());
        assert_eq!(close(&e), 2.0);
        assert_eq!(close_with(&unit_env(0), &s, &s, n.view()), 2.0);
    }
}
