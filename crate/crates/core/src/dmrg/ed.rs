//! Exact diagonalization in a fixed particle-number sector, used as the
//! reference the DMRG engine and all observables are checked against.

use ndarray::{Array2, ArrayView2};

use super::lanczos::lanczos_ground;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::tn::linalg::eigh_lowest;

/// Largest sector the oracle accepts.
pub const MAX_SECTOR_DIM: usize = 200_000;

/// Sectors up to this size are diagonalized densely.
const DENSE_LIMIT: usize = 1200;

/// Occupation configurations with a fixed particle number, sorted
/// lexicographically.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    pub length: usize,
    pub n_max: usize,
    pub particles: usize,
    pub states: Vec<Vec<usize>>,
}

impl SectorBasis {
    pub fn new(length: usize, n_max: usize, particles: usize) -> Result<Self> {
        let dim = sector_dim(length, n_max, particles);
        if dim == 0 {
            return Err(Error::Domain(format!("no {particles}-particle states on {length} sites")));
        }
        if dim > MAX_SECTOR_DIM {
            return Err(Error::Refused(format!("sector dimension {dim} exceeds {MAX_SECTOR_DIM}")));
        }
        let mut states = Vec::with_capacity(dim);
        let mut cur = Vec::with_capacity(length);
        fill(length, n_max, particles, &mut cur, &mut states);
        Ok(Self { length, n_max, particles, states })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, config: &[usize]) -> Option<usize> {
        self.states.binary_search_by(|s| s.as_slice().cmp(config)).ok()
    }
}

fn fill(length: usize, n_max: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let remaining_sites = length - cur.len();
    if remaining_sites == 0 {
        if left == 0 {
            out.push(cur.clone());
        }
        return;
    }
    for n in 0..=n_max.min(left) {
        if left - n <= (remaining_sites - 1) * n_max {
            cur.push(n);
            fill(length, n_max, left - n, cur, out);
            cur.pop();
        }
    }
}

/// Number of ways to put `n` bosons on `l` sites with at most `n_max` each.
pub fn sector_dim(l: usize, n_max: usize, n: usize) -> usize {
    let mut ways = vec![0usize; n + 1];
    ways[0] = 1;
    for _ in 0..l {
        let mut next = vec![0usize; n + 1];
        for (k, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for m in 0..=n_max {
                if k + m <= n {
                    next[k + m] = next[k + m].saturating_add(w);
                }
            }
        }
        ways = next;
    }
    ways[n]
}

/// Sparse Hamiltonian of the sector as `(row, col, value)` triples.
#[derive(Clone, Debug)]
pub struct SectorHamiltonian {
    pub basis: SectorBasis,
    entries: Vec<(usize, usize, f64)>,
}

impl SectorHamiltonian {
    pub fn new(params: &ModelParams, particles: usize) -> Result<Self> {
        params.validate()?;
        let basis = SectorBasis::new(params.length, params.n_max, particles)?;
        let mut entries = Vec::new();
        for (k, s) in basis.states.iter().enumerate() {
            let mut diag = 0.0;
            for i in 0..s.len() {
                let n = s[i] as f64;
                diag += 0.5 * params.u * n * (n - 1.0);
                if i + 1 < s.len() {
                    diag += params.v * n * s[i + 1] as f64;
                }
            }
            entries.push((k, k, diag));
            if params.t == 0.0 {
                continue;
            }
            for i in 0..s.len() - 1 {
                // b+_i b_{i+1} and b+_{i+1} b_i
                for (from, to) in [(i + 1, i), (i, i + 1)] {
                    if s[from] == 0 || s[to] == params.n_max {
                        continue;
                    }
                    let amp = ((s[from] * (s[to] + 1)) as f64).sqrt();
                    let mut target = s.clone();
                    target[from] -= 1;
                    target[to] += 1;
                    let row = basis.index_of(&target).expect("hop stays in sector");
                    entries.push((row, k, -params.t * amp));
                }
            }
        }
        Ok(Self { basis, entries })
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
    }

    pub fn dense(&self) -> Array2<f64> {
        let n = self.basis.dim();
        let mut h = Array2::zeros((n, n));
        for &(r, c, v) in &self.entries {
            h[[r, c]] += v;
        }
        h
    }

    pub fn element(&self, row: usize, col: usize) -> f64 {
        self.entries.iter().filter(|e| e.0 == row && e.1 == col).map(|e| e.2).sum()
    }
}

/// Ground state stored as coefficients over a sector basis.
#[derive(Clone, Debug)]
pub struct DenseState {
    pub basis: SectorBasis,
    pub coeffs: Vec<f64>,
}

impl DenseState {
    pub fn amplitude(&self, config: &[usize]) -> f64 {
        self.basis.index_of(config).map(|k| self.coeffs[k]).unwrap_or(0.0)
    }

    /// `<psi| prod_k O_k |psi>` for single-site operators on distinct sites.
    pub fn expect_product(&self, ops: &[(usize, ArrayView2<f64>)]) -> f64 {
        let mut total = 0.0;
        for (k, ket) in self.basis.states.iter().enumerate() {
            let ck = self.coeffs[k];
            if ck == 0.0 {
                continue;
            }
            let mut branches = vec![(ket.clone(), ck)];
            for &(site, op) in ops {
                let mut next = Vec::new();
                for (cfg, amp) in branches {
                    for sb in 0..op.nrows() {
                        let w = op[[sb, cfg[site]]];
                        if w != 0.0 {
                            let mut c = cfg.clone();
                            c[site] = sb;
                            next.push((c, amp * w));
                        }
                    }
                }
                branches = next;
            }
            for (cfg, amp) in branches {
                total += amp * self.amplitude(&cfg);
            }
        }
        total
    }

    /// Schmidt values across the cut after `bond` sites, from a dense SVD of
    /// the coefficient matrix, descending.
    pub fn schmidt_values(&self, bond: usize) -> Vec<f64> {
        use std::collections::BTreeMap;
        let mut lefts: BTreeMap<&[usize], usize> = BTreeMap::new();
        let mut rights: BTreeMap<&[usize], usize> = BTreeMap::new();
        for s in &self.basis.states {
            let nl = lefts.len();
            lefts.entry(&s[..bond]).or_insert(nl);
            let nr = rights.len();
            rights.entry(&s[bond..]).or_insert(nr);
        }
        let mut m = nalgebra::DMatrix::zeros(lefts.len(), rights.len());
        for (s, &c) in self.basis.states.iter().zip(&self.coeffs) {
            m[(lefts[&s[..bond]], rights[&s[bond..]])] = c;
        }
        let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }
}

/// Lowest eigenpair of the `particles`-sector Hamiltonian.
pub fn exact_diag_oracle(params: &ModelParams, particles: usize) -> Result<(f64, DenseState)> {
    let h = SectorHamiltonian::new(params, particles)?;
    let n = h.basis.dim();
    let (energy, coeffs) = if n <= DENSE_LIMIT { eigh_lowest(h.dense().view()) } else { sparse_ground(&h)? };
    Ok((energy, DenseState { basis: h.basis, coeffs }))
}

/// Restarted Lanczos on the sparse sector Hamiltonian.
fn sparse_ground(h: &SectorHamiltonian) -> Result<(f64, Vec<f64>)> {
    let n = h.basis.dim();
    let mut start: Vec<f64> = (0..n).map(|k| 1.0 + 0.01 * ((k * 7919) % 113) as f64).collect();
    for _ in 0..200 {
        let r = lanczos_ground(|x, y| h.apply(x, y), &start, 120, 1e-13)?;
        if r.converged {
            return Ok((r.energy, r.vector));
        }
        start = r.vector;
    }
    Err(Error::Invariant("oracle Lanczos did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sector_dimensions() {
        assert_eq!(sector_dim(6, 2, 6), 141);
        assert_eq!(sector_dim(8, 3, 8), 3823);
        assert_eq!(SectorBasis::new(6, 2, 6).unwrap().dim(), 141);
        assert!(matches!(SectorBasis::new(20, 3, 20), Err(Error::Refused(_))));
    }

    #[test]
    fn two_site_matrix_by_hand() {
        // basis |02>, |11>, |20>; H|11> = -sqrt(2) t (|20> + |02>), <20|H|20> = U
        let (t, u) = (1.0, 4.0);
        let p = ModelParams::new(t, u, 0.0, 2, 2).unwrap();
        let h = SectorHamiltonian::new(&p, 2).unwrap().dense();
        let s2 = 2f64.sqrt();
        let want = ndarray::array![[u, -s2 * t, 0.0], [-s2 * t, 0.0, -s2 * t], [0.0, -s2 * t, u]];
        assert!((&h - &want).iter().all(|x| x.abs() < 1e-14));
        let (e, _) = exact_diag_oracle(&p, 2).unwrap();
        // lowest root of the symmetric block: (U - sqrt(U^2 + 16 t^2)) / 2
        let exact = (u - (u * u + 16.0 * t * t).sqrt()) / 2.0;
        assert!((e - exact).abs() < 1e-12);
    }

    #[test]
    fn classical_and_hardcore_limits() {
        let p = ModelParams::new(0.0, 10.0, 1.0, 3, 4).unwrap();
        assert!((exact_diag_oracle(&p, 4).unwrap().0 - 3.0).abs() < 1e-12);
        let hc = ModelParams::new(1.0, 0.0, 0.0, 1, 4).unwrap();
        let free = -2.0 * ((std::f64::consts::PI / 5.0).cos() + (2.0 * std::f64::consts::PI / 5.0).cos());
        assert!((exact_diag_oracle(&hc, 2).unwrap().0 - free).abs() < 1e-12);
        assert!((free + 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sparse_path_matches_dense() {
        let p = ModelParams::new(1.0, 3.0, 1.0, 3, 7).unwrap();
        let h = SectorHamiltonian::new(&p, 7).unwrap();
        assert_eq!(h.basis.dim(), 1128);
        let (e_dense, v_dense) = eigh_lowest(h.dense().view());
        let (e, v) = sparse_ground(&h).unwrap();
        assert!((e - e_dense).abs() < 1e-10);
        let ov: f64 = v.iter().zip(&v_dense).map(|(a, b)| a * b).sum();
        assert!((ov.abs() - 1.0).abs() < 1e-8);
    }
}
