use super::operators::{annihilation, creation, number, pair_count};
use super::params::ModelParams;
use crate::error::Result;
use crate::tn::mpo::{Mpo, MpoTerm};

/// Channel charges of the bond-dimension-5 MPO: idle, after `b+`, after
/// `b`, after `n`, complete.
const SHIFTS: [i32; 5] = [0, 1, -1, 0, 0];

/// The Hamiltonian as an MPO with channels
/// `0 -> 0: 1`, `0 -> 1: -t b+`, `0 -> 2: -t b`, `0 -> 3: V n`,
/// `0 -> 4: U/2 n(n-1)`, `1 -> 4: b`, `2 -> 4: b+`, `3 -> 4: n`, `4 -> 4: 1`.
pub fn build_mpo(params: &ModelParams) -> Result<Mpo> {
    params.validate()?;
    let d = params.d();
    let id = ndarray::Array2::eye(d);
    let (bd, b, n) = (creation(d), annihilation(d), number(d));
    let term = |wl, wr, op| MpoTerm { wl, wr, op };
    let terms = vec![
        term(0, 0, id.clone()),
        term(0, 1, &bd * -params.t),
        term(0, 2, &b * -params.t),
        term(0, 3, &n * params.v),
        term(0, 4, pair_count(d) * params.u),
        term(1, 4, b.clone()),
        term(2, 4, bd.clone()),
        term(3, 4, n.clone()),
        term(4, 4, id),
    ];
    Mpo::new(d, params.length, SHIFTS.to_vec(), terms, 0, 4)
}
