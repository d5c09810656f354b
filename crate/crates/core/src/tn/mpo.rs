use ndarray::Array2;

use super::mps::MpsState;
use super::site::{self, Env};
use crate::error::{Error, Result};

/// One entry `W[wl, wr]` of the site tensor, coefficient included.
#[derive(Clone, Debug)]
pub struct MpoTerm {
    pub wl: usize,
    pub wr: usize,
    /// `op[[s_bra, s_ket]]`.
    pub op: Array2<f64>,
}

/// Translation-invariant matrix product operator on an open chain.
///
/// Channel `w` on a bond means the operator string to the left of the bond
/// has changed the particle number by `shifts[w]`. The chain starts in
/// channel `left` and must end in channel `right`.
#[derive(Clone, Debug)]
pub struct Mpo {
    d: usize,
    length: usize,
    shifts: Vec<i32>,
    terms: Vec<MpoTerm>,
    left: usize,
    right: usize,
}

impl Mpo {
    pub fn new(d: usize, length: usize, shifts: Vec<i32>, terms: Vec<MpoTerm>, left: usize, right: usize) -> Result<Self> {
        let w = shifts.len();
        if left >= w || right >= w || length == 0 {
            return Err(Error::Shape("boundary channel out of range".into()));
        }
        for t in &terms {
            if t.wl >= w || t.wr >= w || t.op.dim() != (d, d) {
                return Err(Error::Shape(format!("bad term {}->{}", t.wl, t.wr)));
            }
            let shift = shifts[t.wr] - shifts[t.wl];
            for ((sb, sk), &x) in t.op.indexed_iter() {
                if x != 0.0 && sb as i32 - sk as i32 != shift {
                    return Err(Error::Charge(format!("term {}->{} breaks the channel charge", t.wl, t.wr)));
                }
            }
        }
        Ok(Self { d, length, shifts, terms, left, right })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn bond_dim(&self) -> usize {
        self.shifts.len()
    }

    pub fn shifts(&self) -> &[i32] {
        &self.shifts
    }

    pub fn terms(&self) -> &[MpoTerm] {
        &self.terms
    }

    pub fn left_channel(&self) -> usize {
        self.left
    }

    pub fn right_channel(&self) -> usize {
        self.right
    }

    /// `<psi|H|psi>` by a left-to-right sweep of per-channel environments.
    pub fn expectation(&self, psi: &MpsState) -> Result<f64> {
        if psi.len() != self.length || psi.d() != self.d {
            return Err(Error::Domain("MPO and state differ in length or local dimension".into()));
        }
        let w = self.bond_dim();
        let mut envs: Vec<Option<Env>> = vec![None; w];
        envs[self.left] = Some(site::unit_env(0));
        for i in 0..self.length {
            let a = psi.left_site(i);
            let mut next: Vec<Option<Env>> = vec![None; w];
            for t in &self.terms {
                let Some(e) = &envs[t.wl] else { continue };
                let contrib = site::transfer(e, &a, &a, t.op.view());
                let slot = next[t.wr].get_or_insert_with(Env::new);
                for (k, m) in contrib {
                    match slot.get_mut(&k) {
                        Some(acc) => *acc += &m,
                        None => {
                            slot.insert(k, m);
                        }
                    }
                }
            }
            envs = next;
        }
        Ok(envs[self.right].as_ref().map(site::close).unwrap_or(0.0))
    }

    /// Matrix element `<bra|H|ket>` between two occupation configurations.
    pub fn matrix_element(&self, bra: &[usize], ket: &[usize]) -> f64 {
        let w = self.bond_dim();
        let mut v = vec![0.0; w];
        v[self.left] = 1.0;
        for (&sb, &sk) in bra.iter().zip(ket) {
            let mut next = vec![0.0; w];
            for t in &self.terms {
                next[t.wr] += v[t.wl] * t.op[[sb, sk]];
            }
            v = next;
        }
        v[self.right]
    }

    /// The operator at one site for the bond channels `(wl, wr)` (zero if
    /// no term connects them).
    pub fn block(&self, wl: usize, wr: usize) -> Array2<f64> {
        let mut out = Array2::zeros((self.d, self.d));
        for t in self.terms.iter().filter(|t| t.wl == wl && t.wr == wr) {
            out += &t.op;
        }
        out
    }
}
