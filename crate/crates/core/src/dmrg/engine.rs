//! Two-site finite DMRG in a fixed particle-number sector.
//!
//! The two-site tensor at bond `(i, i+1)` is stored per middle charge `q`
//! as a matrix whose rows fuse `(sigma_i, left bond sector q - sigma_i)` and
//! whose columns fuse `(sigma_{i+1}, right bond sector q + sigma_{i+1})`.
//! Environments are kept per MPO channel `w` and ket sector; the bra sector
//! is shifted by the channel charge.

use std::collections::BTreeMap;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, ArrayViewMut2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ConvergenceReport, DmrgConfig};
use super::lanczos::lanczos_ground;
use crate::error::{Error, Result};
use crate::model::{build_mpo, ModelParams};
use crate::tn::leg::{ChargeLeg, Direction};
use crate::tn::linalg::{eigh_descending, svd_sorted};
use crate::tn::mpo::Mpo;
use crate::tn::mps::MpsState;
use crate::tn::site::SiteMatrices;
use crate::tn::svd::{select_kept, Candidate};

/// Ground state of the extended Bose-Hubbard chain with `target_n` particles.
///
/// Without `initial`, the run starts from a product state: uniform filling
/// when `V <= U`, a period-two density wave otherwise.
pub fn run_dmrg(
    params: &ModelParams,
    config: &DmrgConfig,
    target_n: i32,
    initial: Option<&MpsState>,
) -> Result<(MpsState, ConvergenceReport)> {
    params.validate()?;
    config.validate()?;
    params.check_filling(target_n)?;
    let mpo = build_mpo(params)?;
    let start = match initial {
        Some(s) => {
            if s.len() != params.length || s.d() != params.d() || s.total_particles() != target_n {
                return Err(Error::Domain("initial state does not match chain, local dimension or filling".into()));
            }
            s.clone()
        }
        None => MpsState::product_state(&initial_occupations(params, target_n), params.d(), config.chi_max)?,
    };
    run_dmrg_mpo(&mpo, config, &start)
}

/// Product-state occupations used to seed a run.
pub fn initial_occupations(params: &ModelParams, n: i32) -> Vec<usize> {
    let l = params.length;
    let n = n.max(0) as usize;
    if params.v <= params.u {
        // spread n particles as evenly as possible
        (0..l).map(|i| (i + 1) * n / l - i * n / l).collect()
    } else {
        let top = params.n_max.min(2);
        let mut occ: Vec<usize> = (0..l).map(|i| if i % 2 == 0 { top } else { 0 }).collect();
        let mut total: usize = occ.iter().sum();
        while total > n {
            let i = (0..l).rev().max_by_key(|&i| occ[i]).unwrap();
            occ[i] -= 1;
            total -= 1;
        }
        while total < n {
            let i = (0..l).filter(|&i| occ[i] < params.n_max).min_by_key(|&i| occ[i]).unwrap();
            occ[i] += 1;
            total += 1;
        }
        occ
    }
}

/// DMRG for an arbitrary charge-conserving MPO, starting from `initial`.
pub fn run_dmrg_mpo(mpo: &Mpo, config: &DmrgConfig, initial: &MpsState) -> Result<(MpsState, ConvergenceReport)> {
    config.validate()?;
    let l = mpo.len();
    if l < 2 || initial.len() != l || initial.d() != mpo.d() {
        return Err(Error::Domain("DMRG needs at least two sites matching the MPO".into()));
    }
    let mut sw = Sweeper::new(mpo, config, initial);
    let tol = config.energy_tol_for(l);
    let mut report = ConvergenceReport {
        energy_per_sweep: Vec::new(),
        energy_per_half_sweep: Vec::new(),
        final_energy: f64::NAN,
        discarded_weight_max: 0.0,
        converged: false,
        sweeps_used: 0,
        lanczos_unconverged: 0,
    };
    for sweep in 0..config.max_sweeps {
        let chi = config.chi_at(sweep);
        let alpha = config.mixer_at(sweep);
        let noise = if sweep == 0 { config.noise } else { 0.0 };
        sw.discarded_max = 0.0;
        let mut energy = f64::NAN;
        if l > 2 {
            for i in 0..l - 2 {
                energy = sw.update(i, Move::Right, chi, alpha, noise)?;
            }
            report.energy_per_half_sweep.push(energy);
        }
        for i in (0..l - 1).rev() {
            energy = sw.update(i, Move::Left, chi, alpha, noise)?;
        }
        report.energy_per_half_sweep.push(energy);
        report.energy_per_sweep.push(energy);
        report.sweeps_used = sweep + 1;
        report.discarded_weight_max = sw.discarded_max;
        if sweep >= 1 && alpha == 0.0 && chi == config.chi_max {
            let prev = report.energy_per_sweep[sweep - 1];
            if (energy - prev).abs() < tol {
                report.converged = true;
                break;
            }
        }
    }
    report.lanczos_unconverged = sw.lanczos_unconverged;
    let state = MpsState::from_right_canonical(sw.sites, mpo.d(), config.chi_max, initial.total_particles())?;
    report.final_energy = mpo.expectation(&state)?;
    Ok((state, report))
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Move {
    Right,
    Left,
}

/// Per-channel environment: `[w][q_ket] -> (D_bra(q_ket + shift_w), D_ket(q_ket))`.
type ChEnv = Vec<BTreeMap<i32, Array2<f64>>>;

/// Nonzero entries `(s_bra, s_ket, value)` of each MPO term.
struct Term {
    wl: usize,
    wr: usize,
    entries: Vec<(usize, usize, f64)>,
}

/// Environment fused with one site's MPO tensor, acting on a fused index:
/// `[q_ket] -> (dim of sector q_ket + shift, dim of sector q_ket)`.
type FusedOp = BTreeMap<i32, Fused>;

enum Fused {
    /// Exactly the identity (idle channel on the left, finished channel on
    /// the right); the product is skipped.
    Identity,
    Dense(Array2<f64>),
}

#[derive(Clone, Debug)]
struct SectorLayout {
    /// Per occupation: `(offset, dim)` of the block in the fused index.
    rows: Vec<Option<(usize, usize)>>,
    cols: Vec<Option<(usize, usize)>>,
    nrows: usize,
    ncols: usize,
    flat: usize,
}

struct Layout {
    sectors: BTreeMap<i32, SectorLayout>,
    size: usize,
}

impl Layout {
    fn new(left: &ChargeLeg, right: &ChargeLeg, d: usize) -> Self {
        let mut candidates: Vec<i32> = Vec::new();
        for &ql in left.charges() {
            for s in 0..d as i32 {
                candidates.push(ql + s);
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        let mut sectors = BTreeMap::new();
        let mut size = 0;
        for q in candidates {
            let mut off = 0;
            let rows: Vec<Option<(usize, usize)>> = (0..d)
                .map(|s| {
                    left.sector_dim(q - s as i32).map(|g| {
                        off += g;
                        (off - g, g)
                    })
                })
                .collect();
            let nrows = off;
            off = 0;
            let cols: Vec<Option<(usize, usize)>> = (0..d)
                .map(|s| {
                    right.sector_dim(q + s as i32).map(|g| {
                        off += g;
                        (off - g, g)
                    })
                })
                .collect();
            let ncols = off;
            if nrows == 0 || ncols == 0 {
                continue;
            }
            sectors.insert(q, SectorLayout { rows, cols, nrows, ncols, flat: size });
            size += nrows * ncols;
        }
        Self { sectors, size }
    }
}

struct Sweeper<'a> {
    terms: Vec<Term>,
    shifts: Vec<i32>,
    mix_channels: Vec<usize>,
    d: usize,
    config: &'a DmrgConfig,
    sites: Vec<SiteMatrices>,
    left_envs: Vec<Option<ChEnv>>,
    right_envs: Vec<Option<ChEnv>>,
    rng: ChaCha8Rng,
    discarded_max: f64,
    lanczos_unconverged: usize,
}

impl<'a> Sweeper<'a> {
    fn new(mpo: &'a Mpo, config: &'a DmrgConfig, initial: &MpsState) -> Self {
        let l = mpo.len();
        let d = mpo.d();
        let w = mpo.bond_dim();
        let terms = mpo
            .terms()
            .iter()
            .map(|t| Term {
                wl: t.wl,
                wr: t.wr,
                entries: t.op.indexed_iter().filter(|(_, &x)| x != 0.0).map(|((b, k), &x)| (b, k, x)).collect(),
            })
            .collect();
        let mix_channels =
            (0..w).filter(|&c| c != mpo.left_channel() && c != mpo.right_channel()).collect();
        let mut sites: Vec<SiteMatrices> = (0..l).map(|i| initial.right_site(i)).collect();
        sites[0].scale_rows(&initial.lambda(0).by_sector());
        let mut sw = Self {
            terms,
            shifts: mpo.shifts().to_vec(),
            mix_channels,
            d,
            config,
            sites,
            left_envs: vec![None; l + 1],
            right_envs: vec![None; l + 1],
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            discarded_max: 0.0,
            lanczos_unconverged: 0,
        };
        sw.left_envs[0] = Some(sw.unit_env(mpo.left_channel(), 0));
        sw.right_envs[l] = Some(sw.unit_env(mpo.right_channel(), initial.total_particles()));
        for j in (2..l).rev() {
            let env = sw.grow_right(sw.right_envs[j + 1].as_ref().unwrap(), &sw.sites[j]);
            sw.right_envs[j] = Some(env);
        }
        sw
    }

    fn unit_env(&self, channel: usize, q: i32) -> ChEnv {
        let mut env: ChEnv = vec![BTreeMap::new(); self.shifts.len()];
        env[channel].insert(q, Array2::eye(1));
        env
    }

    /// Left environment of bond `i + 1` from that of bond `i` and the
    /// left-isometric site `i`.
    fn grow_left(&self, env: &ChEnv, a: &SiteMatrices) -> ChEnv {
        let mut out: ChEnv = vec![BTreeMap::new(); self.shifts.len()];
        for t in &self.terms {
            for (&q, lm) in &env[t.wl] {
                let qb = q + self.shifts[t.wl];
                for &(sb, sk, val) in &t.entries {
                    let (Some(ak), Some(ab)) = (a.mats.get(&(q, sk)), a.mats.get(&(qb, sb))) else { continue };
                    let c = ab.t().dot(&lm.dot(ak)) * val;
                    accumulate(&mut out[t.wr], q + sk as i32, c);
                }
            }
        }
        out
    }

    /// Right environment of bond `j` from that of bond `j + 1` and the
    /// right-isometric site `j`.
    fn grow_right(&self, env: &ChEnv, b: &SiteMatrices) -> ChEnv {
        let mut out: ChEnv = vec![BTreeMap::new(); self.shifts.len()];
        for t in &self.terms {
            for (&r, rm) in &env[t.wr] {
                for &(sb, sk, val) in &t.entries {
                    let q = r - sk as i32;
                    let qb = q + self.shifts[t.wl];
                    let (Some(bk), Some(bb)) = (b.mats.get(&(q, sk)), b.mats.get(&(qb, sb))) else { continue };
                    let c = bb.dot(&rm.dot(&bk.t())) * val;
                    accumulate(&mut out[t.wl], q, c);
                }
            }
        }
        out
    }

    /// Left environment fused with site `i`'s MPO tensor, per middle channel.
    fn fuse_left(&self, env: &ChEnv, layout: &Layout) -> Vec<FusedOp> {
        let mut out: Vec<BTreeMap<i32, Array2<f64>>> = vec![BTreeMap::new(); self.shifts.len()];
        for t in &self.terms {
            let shift = self.shifts[t.wr];
            for (&q, sl) in &layout.sectors {
                let Some(slp) = layout.sectors.get(&(q + shift)) else { continue };
                for &(sb, sk, val) in &t.entries {
                    let (Some((ko, kn)), Some((bo, bn))) = (sl.rows[sk], slp.rows[sb]) else { continue };
                    let Some(m) = env[t.wl].get(&(q - sk as i32)) else { continue };
                    let dense = out[t.wr].entry(q).or_insert_with(|| Array2::zeros((slp.nrows, sl.nrows)));
                    dense.slice_mut(s![bo..bo + bn, ko..ko + kn]).scaled_add(val, m);
                }
            }
        }
        finish_fused(out)
    }

    /// Right environment fused with site `i + 1`'s MPO tensor, per middle
    /// channel.
    fn fuse_right(&self, env: &ChEnv, layout: &Layout) -> Vec<FusedOp> {
        let mut out: Vec<BTreeMap<i32, Array2<f64>>> = vec![BTreeMap::new(); self.shifts.len()];
        for t in &self.terms {
            let shift = self.shifts[t.wl];
            for (&q, sl) in &layout.sectors {
                let Some(slp) = layout.sectors.get(&(q + shift)) else { continue };
                for &(sb, sk, val) in &t.entries {
                    let (Some((ko, kn)), Some((bo, bn))) = (sl.cols[sk], slp.cols[sb]) else { continue };
                    let Some(m) = env[t.wr].get(&(q + sk as i32)) else { continue };
                    let dense = out[t.wl].entry(q).or_insert_with(|| Array2::zeros((slp.ncols, sl.ncols)));
                    dense.slice_mut(s![bo..bo + bn, ko..ko + kn]).scaled_add(val, m);
                }
            }
        }
        finish_fused(out)
    }

    fn update(&mut self, i: usize, dir: Move, chi: usize, alpha: f64, noise: f64) -> Result<f64> {
        let d = self.d;
        let layout = Layout::new(&self.sites[i].left, &self.sites[i + 1].right, d);
        if layout.size == 0 {
            return Err(Error::DegenerateState);
        }
        let mut theta = vec![0.0; layout.size];
        for (&q, sl) in &layout.sectors {
            let mut tq = ArrayViewMut2::from_shape((sl.nrows, sl.ncols), &mut theta[sl.flat..sl.flat + sl.nrows * sl.ncols])
                .unwrap();
            for s1 in 0..d {
                let Some((ro, rn)) = sl.rows[s1] else { continue };
                let Some(m1) = self.sites[i].mats.get(&(q - s1 as i32, s1)) else { continue };
                for s2 in 0..d {
                    let Some((co, cn)) = sl.cols[s2] else { continue };
                    let Some(m2) = self.sites[i + 1].mats.get(&(q, s2)) else { continue };
                    general_mat_mul(1.0, m1, m2, 1.0, &mut tq.slice_mut(s![ro..ro + rn, co..co + cn]));
                }
            }
        }
        if noise > 0.0 {
            for x in theta.iter_mut() {
                *x += noise * self.rng.random_range(-1.0..1.0);
            }
        }
        if theta.iter().all(|&x| x == 0.0) {
            theta.iter_mut().for_each(|x| *x = 1.0);
        }

        let lw = self.fuse_left(self.left_envs[i].as_ref().expect("left environment"), &layout);
        let wr = self.fuse_right(self.right_envs[i + 2].as_ref().expect("right environment"), &layout);
        let shifts = &self.shifts;
        let apply = |x: &[f64], y: &mut [f64]| {
            for (&q, sl) in &layout.sectors {
                let xq = ArrayView2::from_shape((sl.nrows, sl.ncols), &x[sl.flat..sl.flat + sl.nrows * sl.ncols]).unwrap();
                for (w, shift) in shifts.iter().enumerate() {
                    let (Some(lop), Some(rop)) = (lw[w].get(&q), wr[w].get(&q)) else { continue };
                    let slp = &layout.sectors[&(q + shift)];
                    let mut yq =
                        ArrayViewMut2::from_shape((slp.nrows, slp.ncols), &mut y[slp.flat..slp.flat + slp.nrows * slp.ncols])
                            .unwrap();
                    match (lop, rop) {
                        (Fused::Identity, Fused::Identity) => yq += &xq,
                        (Fused::Identity, Fused::Dense(r)) => general_mat_mul(1.0, &xq, &r.t(), 1.0, &mut yq),
                        (Fused::Dense(l), Fused::Identity) => general_mat_mul(1.0, l, &xq, 1.0, &mut yq),
                        (Fused::Dense(l), Fused::Dense(r)) => {
                            let t = l.dot(&xq);
                            general_mat_mul(1.0, &t, &r.t(), 1.0, &mut yq);
                        }
                    }
                }
            }
        };
        let result = lanczos_ground(apply, &theta, self.config.lanczos_iters, self.config.lanczos_tol)?;
        if !result.converged {
            self.lanczos_unconverged += 1;
        }
        let theta = result.vector;
        let view = |q: &i32| {
            let sl = &layout.sectors[q];
            ArrayView2::from_shape((sl.nrows, sl.ncols), &theta[sl.flat..sl.flat + sl.nrows * sl.ncols]).unwrap()
        };

        // Per sector: kept basis (columns) on the side we move away from,
        // plus the weights used to rank them.
        let mut cands = Vec::new();
        let mut bases: BTreeMap<i32, Array2<f64>> = BTreeMap::new();
        if alpha == 0.0 {
            for &q in layout.sectors.keys() {
                let (u, sv, vt) = svd_sorted(view(&q));
                cands.extend(sv.iter().enumerate().map(|(index, &value)| Candidate { charge: q, index, value }));
                bases.insert(q, if dir == Move::Right { u } else { vt.reversed_axes() });
            }
        } else {
            let mut rho: BTreeMap<i32, Array2<f64>> = BTreeMap::new();
            for (&q, sl) in &layout.sectors {
                let tq = view(&q);
                let dim = if dir == Move::Right { sl.nrows } else { sl.ncols };
                let r = rho.entry(q).or_insert_with(|| Array2::zeros((dim, dim)));
                if dir == Move::Right {
                    general_mat_mul(1.0, &tq, &tq.t(), 1.0, r);
                } else {
                    general_mat_mul(1.0, &tq.t(), &tq, 1.0, r);
                }
            }
            for &w in &self.mix_channels {
                let shift = self.shifts[w];
                for &q in layout.sectors.keys() {
                    if !layout.sectors.contains_key(&(q + shift)) {
                        continue;
                    }
                    let tq = view(&q);
                    let op = if dir == Move::Right { lw[w].get(&q) } else { wr[w].get(&q) };
                    let x = match (op, dir) {
                        (None, _) => continue,
                        (Some(Fused::Identity), _) => tq.to_owned(),
                        (Some(Fused::Dense(l)), Move::Right) => l.dot(&tq),
                        (Some(Fused::Dense(r)), Move::Left) => tq.dot(&r.t()),
                    };
                    let r = rho.get_mut(&(q + shift)).unwrap();
                    if dir == Move::Right {
                        general_mat_mul(alpha, &x, &x.t(), 1.0, r);
                    } else {
                        general_mat_mul(alpha, &x.t(), &x, 1.0, r);
                    }
                }
            }
            for (q, r) in rho {
                let (vals, vecs) = eigh_descending(r.view());
                cands.extend(
                    vals.iter().enumerate().map(|(index, &v)| Candidate { charge: q, index, value: v.max(0.0).sqrt() }),
                );
                bases.insert(q, vecs);
            }
        }
        let sel = select_kept(cands, chi, self.config.sv_min)?;
        self.discarded_max = self.discarded_max.max(sel.discarded_weight);
        let counts = sel.counts();
        let bond = ChargeLeg::from_sectors(counts.iter().map(|(&q, &k)| (q, k)), Direction::Out)?;

        let mut left = SiteMatrices::new(self.sites[i].left.clone(), bond.clone(), d);
        let mut right = SiteMatrices::new(bond.dual(), self.sites[i + 1].right.clone(), d);
        for (&q, &k) in &counts {
            let sl = &layout.sectors[&q];
            let basis = bases[&q].slice(s![.., ..k]).to_owned();
            let tq = view(&q);
            // Right move: left site gets the basis, right site the centre
            // (basis^T theta). Left move: mirror image.
            let (a, c) = match dir {
                Move::Right => {
                    let c = basis.t().dot(&tq);
                    (basis, c)
                }
                Move::Left => {
                    let a = tq.dot(&basis);
                    (a, basis.reversed_axes())
                }
            };
            for s1 in 0..d {
                if let Some((ro, rn)) = sl.rows[s1] {
                    left.mats.insert((q - s1 as i32, s1), a.slice(s![ro..ro + rn, ..]).to_owned());
                }
            }
            for s2 in 0..d {
                if let Some((co, cn)) = sl.cols[s2] {
                    right.mats.insert((q, s2), c.slice(s![.., co..co + cn]).to_owned());
                }
            }
        }
        self.sites[i] = left;
        self.sites[i + 1] = right;
        match dir {
            Move::Right => {
                let env = self.grow_left(self.left_envs[i].as_ref().unwrap(), &self.sites[i]);
                self.left_envs[i + 1] = Some(env);
            }
            Move::Left => {
                let env = self.grow_right(self.right_envs[i + 2].as_ref().unwrap(), &self.sites[i + 1]);
                self.right_envs[i + 1] = Some(env);
            }
        }
        Ok(result.energy)
    }
}

fn accumulate(map: &mut BTreeMap<i32, Array2<f64>>, key: i32, m: Array2<f64>) {
    match map.get_mut(&key) {
        Some(acc) => *acc += &m,
        None => {
            map.insert(key, m);
        }
    }
}

fn finish_fused(raw: Vec<BTreeMap<i32, Array2<f64>>>) -> Vec<FusedOp> {
    raw.into_iter()
        .map(|per_q| {
            per_q
                .into_iter()
                .map(|(q, m)| {
                    let identity = m.is_square()
                        && m.indexed_iter().all(|((i, j), &x)| (x - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                    (q, if identity { Fused::Identity } else { Fused::Dense(m) })
                })
                .collect()
        })
        .collect()
}
