use std::collections::BTreeMap;

use ndarray::{Array2, Array3, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::block::BlockTensor;
use super::leg::{ChargeLeg, Direction};
use super::linalg::svd_sorted;
use super::site::{self, Env, SiteMatrices};
use super::svd::{select_kept, Candidate, SchmidtSpectrum, SV_MIN};
use crate::error::{Error, Result};

/// Matrix product state in Vidal form, `Gamma_0 Lambda_1 Gamma_1 ... Gamma_{L-1}`.
///
/// `lambdas` has `L + 1` entries; the two boundary ones are the trivial
/// spectra at charge 0 and `N`. Bond `b` sits between sites `b - 1` and `b`
/// and carries the number of particles to its left.
#[derive(Clone, Debug)]
pub struct MpsState {
    gammas: Vec<BlockTensor>,
    lambdas: Vec<SchmidtSpectrum>,
    d: usize,
    chi_max: usize,
    total_particles: i32,
}

/// Single-site pseudo-wavefunction `Lambda_i Gamma_i Lambda_{i+1}` as a dense
/// `(chi_left, d, chi_right)` array, virtual indices in sector order.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaTensor {
    pub site: usize,
    pub data: Array3<f64>,
}

impl ThetaTensor {
    pub fn norm_squared(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }
}

impl MpsState {
    /// Assembles a state from raw parts. The result need not be canonical.
    pub fn from_parts(
        gammas: Vec<BlockTensor>,
        lambdas: Vec<SchmidtSpectrum>,
        d: usize,
        chi_max: usize,
        total_particles: i32,
    ) -> Result<Self> {
        let l = gammas.len();
        if l < 1 || lambdas.len() != l + 1 {
            return Err(Error::Shape(format!("{l} sites need {} spectra, got {}", l + 1, lambdas.len())));
        }
        if lambdas[0].sectors() != [0] || lambdas[l].sectors() != [total_particles] {
            return Err(Error::Charge("boundary bonds must carry charge 0 and N".into()));
        }
        for (i, g) in gammas.iter().enumerate() {
            if g.rank() != 3 || g.leg(1) != &ChargeLeg::physical(d) || g.total_charge() != 0 {
                return Err(Error::Shape(format!("site {i}: expected legs (left, physical d={d}, right)")));
            }
            if g.leg(0) != &lambdas[i].leg(Direction::In) || g.leg(2) != &lambdas[i + 1].leg(Direction::Out) {
                return Err(Error::Charge(format!("site {i}: virtual legs disagree with bond spectra")));
            }
        }
        for s in &lambdas {
            if s.sectors().iter().any(|&q| q < 0 || q > total_particles) {
                return Err(Error::Charge(format!("bond charge outside [0, {total_particles}]")));
            }
        }
        Ok(Self { gammas, lambdas, d, chi_max, total_particles })
    }

    /// Bond dimension one everywhere with the given occupation per site.
    pub fn product_state(occupations: &[usize], d: usize, chi_max: usize) -> Result<Self> {
        if occupations.is_empty() {
            return Err(Error::Domain("empty chain".into()));
        }
        if let Some(&bad) = occupations.iter().find(|&&n| n >= d) {
            return Err(Error::Domain(format!("occupation {bad} outside [0, {}]", d - 1)));
        }
        let mut q = 0i32;
        let mut gammas = Vec::with_capacity(occupations.len());
        let mut lambdas = vec![SchmidtSpectrum::trivial(0)];
        for &n in occupations {
            let mut s = SiteMatrices::new(
                ChargeLeg::trivial(q, Direction::In),
                ChargeLeg::trivial(q + n as i32, Direction::Out),
                d,
            );
            s.mats.insert((q, n), Array2::eye(1));
            gammas.push(s.to_block());
            q += n as i32;
            lambdas.push(SchmidtSpectrum::trivial(q));
        }
        Self::from_parts(gammas, lambdas, d, chi_max, q)
    }

    /// Random state with `n` particles on `l` sites, bond dimension at most
    /// `chi` per sector, brought to canonical form.
    pub fn random_state(l: usize, d: usize, n: i32, chi: usize, seed: u64) -> Result<Self> {
        let nmax = d as i32 - 1;
        if l == 0 || d < 2 || n < 0 || n > l as i32 * nmax || chi == 0 {
            return Err(Error::Domain(format!("no {n}-particle sector on {l} sites with d={d}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let legs: Vec<ChargeLeg> = (0..=l)
            .map(|b| {
                if b == 0 {
                    return ChargeLeg::trivial(0, Direction::In);
                }
                if b == l {
                    return ChargeLeg::trivial(n, Direction::In);
                }
                let lo = (n - (l - b) as i32 * nmax).max(0);
                let hi = n.min(b as i32 * nmax);
                let sectors: Vec<(i32, usize)> = (lo..=hi).map(|q| (q, rng.random_range(1..=chi))).collect();
                ChargeLeg::from_sectors(sectors, Direction::In).unwrap()
            })
            .collect();
        let mut gammas = Vec::with_capacity(l);
        for i in 0..l {
            let right = legs[i + 1].dual();
            let mut s = SiteMatrices::new(legs[i].clone(), right.clone(), d);
            for (ql, gl) in legs[i].sectors() {
                for sigma in 0..d {
                    if let Some(gr) = right.sector_dim(ql + sigma as i32) {
                        s.mats.insert((ql, sigma), Array2::from_shape_fn((gl, gr), |_| rng.random_range(-1.0..1.0)));
                    }
                }
            }
            gammas.push(s.to_block());
        }
        let lambdas = legs
            .iter()
            .map(|leg| {
                let sectors: Vec<i32> = leg.sectors().flat_map(|(q, g)| std::iter::repeat_n(q, g)).collect();
                SchmidtSpectrum::new(vec![1.0; sectors.len()], sectors).unwrap()
            })
            .collect();
        Self::from_parts(gammas, lambdas, d, chi, n)?.canonicalize()
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn chi_max(&self) -> usize {
        self.chi_max
    }

    pub fn total_particles(&self) -> i32 {
        self.total_particles
    }

    pub fn gamma(&self, site: usize) -> &BlockTensor {
        &self.gammas[site]
    }

    /// Raw bond spectrum, `0 <= bond <= L` (boundaries included).
    pub fn lambda(&self, bond: usize) -> &SchmidtSpectrum {
        &self.lambdas[bond]
    }

    /// Largest bond dimension over all bonds.
    pub fn max_bond_dim(&self) -> usize {
        self.lambdas.iter().map(SchmidtSpectrum::len).max().unwrap_or(1)
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.len() {
            return Err(Error::Domain(format!("site {site} outside chain of length {}", self.len())));
        }
        Ok(())
    }

    fn check_op(&self, op: ArrayView2<f64>) -> Result<()> {
        if op.dim() != (self.d, self.d) {
            return Err(Error::Domain(format!("operator shape {:?}, local dimension {}", op.dim(), self.d)));
        }
        Ok(())
    }

    pub(crate) fn site(&self, i: usize) -> SiteMatrices {
        SiteMatrices::from_block(&self.gammas[i]).expect("validated site tensor")
    }

    /// `Gamma_i Lambda_{i+1}`: right-isometric in canonical form.
    pub(crate) fn right_site(&self, i: usize) -> SiteMatrices {
        let mut s = self.site(i);
        s.scale_cols(&self.lambdas[i + 1].by_sector());
        s
    }

    /// `Lambda_i Gamma_i`: left-isometric in canonical form.
    pub(crate) fn left_site(&self, i: usize) -> SiteMatrices {
        let mut s = self.site(i);
        s.scale_rows(&self.lambdas[i].by_sector());
        s
    }

    /// `Lambda_i Gamma_i Lambda_{i+1}`.
    pub(crate) fn theta_site(&self, i: usize) -> SiteMatrices {
        let mut s = self.right_site(i);
        s.scale_rows(&self.lambdas[i].by_sector());
        s
    }

    /// Brings the state to Vidal canonical form with unit norm.
    pub fn canonicalize(&self) -> Result<Self> {
        let l = self.len();
        let mut ms: Vec<SiteMatrices> = (0..l).map(|i| self.right_site(i)).collect();
        for i in (1..l).rev() {
            let (b, factor) = split_right(&ms[i])?;
            let new_right = b.left.dual();
            ms[i] = b;
            let prev = &mut ms[i - 1];
            let mut mats = BTreeMap::new();
            for (&(q, s), m) in &prev.mats {
                if let Some(f) = factor.get(&(q + s as i32)) {
                    mats.insert((q, s), m.dot(f));
                }
            }
            prev.mats = mats;
            prev.right = new_right;
        }
        let norm = ms[0].norm_squared().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::DegenerateState);
        }
        for m in ms[0].mats.values_mut() {
            *m /= norm;
        }
        Self::from_right_canonical(ms, self.d, self.chi_max, self.total_particles)
    }

    /// Builds the Vidal form from a right-canonical chain whose first site
    /// carries the (unit) norm.
    pub(crate) fn from_right_canonical(
        ms: Vec<SiteMatrices>,
        d: usize,
        chi_max: usize,
        total_particles: i32,
    ) -> Result<Self> {
        let l = ms.len();
        let mut lambdas = vec![SchmidtSpectrum::trivial(0)];
        let mut gammas = Vec::with_capacity(l);
        let mut carry: BTreeMap<i32, Array2<f64>> = BTreeMap::new();
        carry.insert(0, Array2::eye(1));
        let mut left_leg = ChargeLeg::trivial(0, Direction::In);
        for (i, b) in ms.iter().enumerate() {
            // X = carry * B_i, grouped by right charge with rows ordered by sigma
            let mut x: BTreeMap<(i32, usize), Array2<f64>> = BTreeMap::new();
            for (&(q, s), m) in &b.mats {
                if let Some(c) = carry.get(&q) {
                    x.insert((q, s), c.dot(m));
                }
            }
            let lam_left = lambdas[i].by_sector();
            if i == l - 1 {
                let norm = x.values().flat_map(|m| m.iter()).map(|v| v * v).sum::<f64>().sqrt();
                if !(norm > 0.0) {
                    return Err(Error::DegenerateState);
                }
                let mut g = SiteMatrices::new(left_leg.clone(), ChargeLeg::trivial(total_particles, Direction::Out), d);
                for ((q, s), mut m) in x {
                    m /= norm;
                    for (mut row, &w) in m.rows_mut().into_iter().zip(&lam_left[&q]) {
                        row /= w;
                    }
                    g.mats.insert((q, s), m);
                }
                gammas.push(g.to_block());
                lambdas.push(SchmidtSpectrum::trivial(total_particles));
                break;
            }
            let mut by_right: BTreeMap<i32, Vec<(i32, usize)>> = BTreeMap::new();
            for &(q, s) in x.keys() {
                by_right.entry(q + s as i32).or_default().push((q, s));
            }
            let mut cands = Vec::new();
            let mut parts = BTreeMap::new();
            for (qr, keys) in by_right {
                let rows: usize = keys.iter().map(|k| x[k].nrows()).sum();
                let cols = x[&keys[0]].ncols();
                let mut m = Array2::zeros((rows, cols));
                let mut off = 0;
                for k in &keys {
                    let blk = &x[k];
                    m.slice_mut(ndarray::s![off..off + blk.nrows(), ..]).assign(blk);
                    off += blk.nrows();
                }
                let (u, s, vt) = svd_sorted(m.view());
                cands.extend(s.iter().enumerate().map(|(index, &value)| Candidate { charge: qr, index, value }));
                parts.insert(qr, (keys, u, s, vt));
            }
            let sel = select_kept(cands, usize::MAX, SV_MIN)?;
            let counts = sel.counts();
            let spectrum = sel.spectrum();
            let bond = spectrum.leg(Direction::Out);
            let mut g = SiteMatrices::new(left_leg.clone(), bond.clone(), d);
            carry.clear();
            for (qr, (keys, u, s, vt)) in parts {
                let Some(&k) = counts.get(&qr) else { continue };
                let mut off = 0;
                for key in keys {
                    let rows = x[&key].nrows();
                    let mut a = u.slice(ndarray::s![off..off + rows, ..k]).to_owned();
                    for (mut row, &w) in a.rows_mut().into_iter().zip(&lam_left[&key.0]) {
                        row /= w;
                    }
                    g.mats.insert(key, a);
                    off += rows;
                }
                let mut c = vt.slice(ndarray::s![..k, ..]).to_owned();
                for (mut row, &sv) in c.rows_mut().into_iter().zip(&s) {
                    row *= sv;
                }
                carry.insert(qr, c);
            }
            gammas.push(g.to_block());
            lambdas.push(spectrum);
            left_leg = bond.dual();
        }
        Self::from_parts(gammas, lambdas, d, chi_max, total_particles)
    }

    /// Schmidt values of bond `1 <= bond <= L - 1`.
    pub fn schmidt_spectrum(&self, bond: usize) -> Result<SchmidtSpectrum> {
        if bond == 0 || bond >= self.len() {
            return Err(Error::Domain(format!("bond {bond} outside [1, {}]", self.len() - 1)));
        }
        Ok(self.lambdas[bond].clone())
    }

    /// Entanglement entropy of every inner bond, in bond order.
    pub fn entropy_profile(&self) -> Result<Vec<f64>> {
        (1..self.len()).map(|b| super::svd::entanglement_entropy(&self.lambdas[b])).collect()
    }

    pub fn theta_tensor(&self, site: usize) -> Result<ThetaTensor> {
        self.check_site(site)?;
        let s = self.theta_site(site);
        let mut data = Array3::zeros((s.left.dim(), self.d, s.right.dim()));
        for (&(q, sigma), m) in &s.mats {
            let r0 = s.left.offset(q).unwrap();
            let c0 = s.right.offset(q + sigma as i32).unwrap();
            data.slice_mut(ndarray::s![r0..r0 + m.nrows(), sigma, c0..c0 + m.ncols()]).assign(m);
        }
        Ok(ThetaTensor { site, data })
    }

    /// `<O_site>` from the single-site pseudo-wavefunction.
    pub fn expect_local(&self, site: usize, op: ArrayView2<f64>) -> Result<f64> {
        self.check_site(site)?;
        self.check_op(op)?;
        let th = self.theta_site(site);
        Ok(site::close_with(&site::identity_env(&th.left.dual()), &th, &th, op))
    }

    /// `<A_i S_{i+1} ... S_{j-1} B_j>` for `i < j`; `S` defaults to identity.
    pub fn correlate_pair(
        &self,
        i: usize,
        j: usize,
        op_a: ArrayView2<f64>,
        op_b: ArrayView2<f64>,
        string: Option<ArrayView2<f64>>,
    ) -> Result<f64> {
        if i >= j {
            return Err(Error::Domain(format!("correlator needs i < j, got ({i}, {j})")));
        }
        self.check_site(j)?;
        Ok(self.correlation_row(i, op_a, op_b, string)?[j - i - 1])
    }

    /// `<A_i S ... B_j>` for every `j > i`, from one environment sweep.
    pub fn correlation_row(
        &self,
        i: usize,
        op_a: ArrayView2<f64>,
        op_b: ArrayView2<f64>,
        string: Option<ArrayView2<f64>>,
    ) -> Result<Vec<f64>> {
        self.check_site(i)?;
        self.check_op(op_a)?;
        self.check_op(op_b)?;
        let ident = Array2::eye(self.d);
        let string = match string {
            Some(s) => {
                self.check_op(s)?;
                s
            }
            None => ident.view(),
        };
        let th = self.theta_site(i);
        let mut env = site::transfer(&site::identity_env(&th.left.dual()), &th, &th, op_a);
        let mut row = Vec::with_capacity(self.len() - i - 1);
        for j in i + 1..self.len() {
            let b = self.right_site(j);
            row.push(site::close_with(&env, &b, &b, op_b));
            if j + 1 < self.len() {
                env = site::transfer(&env, &b, &b, string);
            }
        }
        Ok(row)
    }

    /// `<self|other>` without absolute value.
    pub fn inner(&self, other: &MpsState) -> Result<f64> {
        if self.len() != other.len() || self.d != other.d {
            return Err(Error::Domain(format!(
                "cannot overlap L={} d={} with L={} d={}",
                self.len(),
                self.d,
                other.len(),
                other.d
            )));
        }
        if self.total_particles != other.total_particles {
            return Ok(0.0);
        }
        let ident = Array2::eye(self.d);
        let mut env: Env = site::unit_env(0);
        for i in 0..self.len() {
            env = site::transfer(&env, &self.left_site(i), &other.left_site(i), ident.view());
        }
        Ok(site::close(&env))
    }

    /// `|<self|other>|`.
    pub fn overlap(&self, other: &MpsState) -> Result<f64> {
        Ok(self.inner(other)?.abs())
    }

    pub fn norm_squared(&self) -> f64 {
        self.inner(self).expect("same shape")
    }

    /// Coefficient `<sigma_0 ... sigma_{L-1}|psi>`.
    pub fn amplitude(&self, config: &[usize]) -> f64 {
        if config.len() != self.len() {
            return 0.0;
        }
        let mut q = 0i32;
        let mut v = Array2::eye(1);
        for (i, &s) in config.iter().enumerate() {
            let m = self.left_site(i);
            match m.mats.get(&(q, s)) {
                Some(b) => v = v.dot(b),
                None => return 0.0,
            }
            q += s as i32;
        }
        if q != self.total_particles {
            return 0.0;
        }
        v[[0, 0]]
    }
}

/// `|<a|b>|` for two states on the same chain.
pub fn overlap(a: &MpsState, b: &MpsState) -> Result<f64> {
    a.overlap(b)
}

/// Splits `M = F * B` with `B` right-isometric, one SVD per left sector.
/// Returns `B` and the factor `F[q_left]` to push into the previous site.
fn split_right(m: &SiteMatrices) -> Result<(SiteMatrices, BTreeMap<i32, Array2<f64>>)> {
    let mut by_left: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for &(q, s) in m.mats.keys() {
        by_left.entry(q).or_default().push(s);
    }
    let mut new_sectors = Vec::new();
    let mut pieces = Vec::new();
    for (q, sigmas) in by_left {
        let rows = m.mats[&(q, sigmas[0])].nrows();
        let cols: usize = sigmas.iter().map(|&s| m.mats[&(q, s)].ncols()).sum();
        let mut full = Array2::zeros((rows, cols));
        let mut off = 0;
        for &s in &sigmas {
            let blk = &m.mats[&(q, s)];
            full.slice_mut(ndarray::s![.., off..off + blk.ncols()]).assign(blk);
            off += blk.ncols();
        }
        let (u, s, vt) = svd_sorted(full.view());
        let scale = s.first().copied().unwrap_or(0.0);
        let k = s.iter().take_while(|&&v| v > 1e-14 * scale && v > 0.0).count();
        if k == 0 {
            continue;
        }
        new_sectors.push((q, k));
        pieces.push((q, sigmas, u, s, vt, k));
    }
    if new_sectors.is_empty() {
        return Err(Error::DegenerateState);
    }
    let left = ChargeLeg::from_sectors(new_sectors, Direction::In)?;
    let mut b = SiteMatrices::new(left, m.right.clone(), m.d);
    let mut factor = BTreeMap::new();
    for (q, sigmas, u, s, vt, k) in pieces {
        let mut off = 0;
        for sigma in sigmas {
            let cols = m.mats[&(q, sigma)].ncols();
            b.mats.insert((q, sigma), vt.slice(ndarray::s![..k, off..off + cols]).to_owned());
            off += cols;
        }
        let mut f = u.slice(ndarray::s![.., ..k]).to_owned();
        for (mut col, &sv) in f.columns_mut().into_iter().zip(&s) {
            col *= sv;
        }
        factor.insert(q, f);
    }
    Ok((b, factor))
}
