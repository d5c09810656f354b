//! One ground state per grid cell, persisted as a self-checking binary file.
//!
//! Layout (little-endian; arrays are a `u32` length followed by `f64`s):
//!
//! ```text
//! "EBHGS1", version u8
//! iu u32, iv u32
//! t, U, V f64; n_max u32; L u32; N i32; chi_max u32; dmrg seed u64
//! energy f64
//! bond count u32, then one spectrum array per bond 1..L-1
//! theta: site u32, dims 3 x u32, values array (all zero when absent)
//! density profile array
//! C_SF, C_DW, C_HI: side u32, then a values array of side^2 entries
//! O_SF, O_DW, O_HI, S, k* f64; entropy profile array; xi, mu2 f64
//! energies per sweep array, per half-sweep array, final energy f64,
//! max discarded weight f64, converged u8, sweeps u32, Lanczos misses u32
//! SHA-256 of all preceding bytes (32 bytes)
//! ```

use ndarray::{Array2, Array3};
use sha2::{Digest, Sha256};

use crate::binio::{Reader, Writer};
use crate::dmrg::{run_dmrg, ConvergenceReport};
use crate::error::{Error, Result};
use crate::model::observables::default_margin;
use crate::model::{correlation_length, Diagnostics, ObservableSet};

use super::grid::{Cell, SweepGrid};

const MAGIC: &[u8; 6] = b"EBHGS1";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct GroundStateRecord {
    pub cell: Cell,
    pub t: f64,
    pub u: f64,
    pub v: f64,
    pub n_max: usize,
    pub length: usize,
    pub particles: i32,
    pub chi_max: usize,
    pub dmrg_seed: u64,
    pub energy: f64,
    /// Schmidt values of bonds `1..L`, descending.
    pub spectra: Vec<Vec<f64>>,
    /// Central `Lambda Gamma Lambda` as `(chi_left, d, chi_right)`.
    pub central_theta: Option<Array3<f64>>,
    pub density_profile: Vec<f64>,
    pub corr_sf: Option<Array2<f64>>,
    pub corr_dw: Option<Array2<f64>>,
    pub corr_hi: Option<Array2<f64>>,
    pub observables: ObservableSet,
    pub xi: f64,
    pub mu2: f64,
    pub convergence: ConvergenceReport,
    pub format_version: u8,
}

/// Transfer-map window used for the stored correlation length.
fn xi_window(length: usize) -> usize {
    crate::model::diagnostics::DEFAULT_WINDOW.min(length / 2).max(2)
}

impl GroundStateRecord {
    /// Runs DMRG for one cell and collects everything downstream stages need.
    pub fn compute(grid: &SweepGrid, cell: Cell) -> Result<Self> {
        let params = grid.params(cell);
        let n = grid.particles();
        let (state, convergence) = run_dmrg(&params, &grid.dmrg, n, None)?;
        let diag = Diagnostics::compute(&state, default_margin(params.length))?;
        let spectra = (1..params.length)
            .map(|b| state.schmidt_spectrum(b).map(|s| s.values().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let theta = state.theta_tensor(params.length / 2)?;
        let (xi, mu2) = if params.length >= 4 {
            let r = correlation_length(&state, xi_window(params.length))?;
            (r.xi, r.mu2)
        } else {
            (0.0, 0.0)
        };
        Ok(Self {
            cell,
            t: params.t,
            u: params.u,
            v: params.v,
            n_max: params.n_max,
            length: params.length,
            particles: n,
            chi_max: grid.dmrg.chi_max,
            dmrg_seed: grid.dmrg.seed,
            energy: convergence.final_energy,
            spectra,
            central_theta: Some(theta.data),
            density_profile: diag.observables.density_profile.clone(),
            corr_sf: Some(diag.corr_sf),
            corr_dw: Some(diag.corr_dw),
            corr_hi: Some(diag.corr_hi),
            observables: diag.observables,
            xi,
            mu2,
            convergence,
            format_version: FORMAT_VERSION,
        })
    }

    pub fn converged(&self) -> bool {
        self.convergence.converged
    }

    /// Whether this record was produced for `cell` of `grid`.
    pub fn matches(&self, grid: &SweepGrid, cell: Cell) -> bool {
        let p = grid.params(cell);
        self.cell == cell
            && self.t == p.t
            && self.u == p.u
            && self.v == p.v
            && self.n_max == p.n_max
            && self.length == p.length
            && self.particles == grid.particles()
            && self.chi_max == grid.dmrg.chi_max
            && self.dmrg_seed == grid.dmrg.seed
    }

    /// Schmidt values of the central bond `L/2`.
    pub fn central_spectrum(&self) -> Result<&[f64]> {
        self.spectra
            .get(self.length / 2 - 1)
            .map(Vec::as_slice)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::RecordIncomplete("central entanglement spectrum".into()))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::default();
        w.bytes(MAGIC);
        w.u8(self.format_version);
        w.u32(self.cell.0)?;
        w.u32(self.cell.1)?;
        w.f64(self.t);
        w.f64(self.u);
        w.f64(self.v);
        w.u32(self.n_max)?;
        w.u32(self.length)?;
        w.i32(self.particles);
        w.u32(self.chi_max)?;
        w.u64(self.dmrg_seed);
        w.f64(self.energy);
        w.u32(self.spectra.len())?;
        for s in &self.spectra {
            w.f64s(s)?;
        }
        w.u32(self.length / 2)?;
        let dims = self.central_theta.as_ref().map_or((0, 0, 0), |t| t.dim());
        for n in [dims.0, dims.1, dims.2] {
            w.u32(n)?;
        }
        let theta: Vec<f64> = self.central_theta.iter().flat_map(|t| t.iter().copied()).collect();
        w.f64s(&theta)?;
        w.f64s(&self.density_profile)?;
        for c in [&self.corr_sf, &self.corr_dw, &self.corr_hi] {
            w.u32(c.as_ref().map_or(0, |m| m.nrows()))?;
            let values: Vec<f64> = c.iter().flat_map(|m| m.iter().copied()).collect();
            w.f64s(&values)?;
        }
        let o = &self.observables;
        for x in [o.o_sf, o.o_dw, o.o_hi, o.structure_factor, o.k_star] {
            w.f64(x);
        }
        w.f64s(&o.entropy_profile)?;
        w.f64(self.xi);
        w.f64(self.mu2);
        let c = &self.convergence;
        w.f64s(&c.energy_per_sweep)?;
        w.f64s(&c.energy_per_half_sweep)?;
        w.f64(c.final_energy);
        w.f64(c.discarded_weight_max);
        w.u8(c.converged as u8);
        w.u32(c.sweeps_used)?;
        w.u32(c.lanczos_unconverged)?;
        let digest = Sha256::digest(&w.buf);
        w.bytes(&digest);
        Ok(w.buf)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        if buf.len() < MAGIC.len() + 32 {
            return Err(Error::Format("record is truncated".into()));
        }
        let (body, digest) = buf.split_at(buf.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Format("record checksum mismatch".into()));
        }
        let mut r = Reader::new(body);
        if r.take(6)? != MAGIC {
            return Err(Error::Format("not an EBHGS1 record".into()));
        }
        let format_version = r.u8()?;
        if format_version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported record version {format_version}")));
        }
        let cell = (r.u32()?, r.u32()?);
        let (t, u, v) = (r.f64()?, r.f64()?, r.f64()?);
        let n_max = r.u32()?;
        let length = r.u32()?;
        let particles = r.i32()?;
        let chi_max = r.u32()?;
        let dmrg_seed = r.u64()?;
        let energy = r.f64()?;
        let n_bonds = r.u32()?;
        let spectra = (0..n_bonds).map(|_| r.f64s()).collect::<Result<Vec<_>>>()?;
        let _site = r.u32()?;
        let dims = (r.u32()?, r.u32()?, r.u32()?);
        let theta = r.f64s()?;
        let central_theta = if theta.is_empty() {
            None
        } else {
            Some(Array3::from_shape_vec(dims, theta).map_err(|_| Error::Format("theta dims".into()))?)
        };
        let density_profile = r.f64s()?;
        let mut corrs = Vec::new();
        for _ in 0..3 {
            let side = r.u32()?;
            let values = r.f64s()?;
            corrs.push(if values.is_empty() {
                None
            } else {
                Some(Array2::from_shape_vec((side, side), values).map_err(|_| Error::Format("correlator side".into()))?)
            });
        }
        let (o_sf, o_dw, o_hi, structure_factor, k_star) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        let entropy_profile = r.f64s()?;
        let (xi, mu2) = (r.f64()?, r.f64()?);
        let convergence = ConvergenceReport {
            energy_per_sweep: r.f64s()?,
            energy_per_half_sweep: r.f64s()?,
            final_energy: r.f64()?,
            discarded_weight_max: r.f64()?,
            converged: r.u8()? != 0,
            sweeps_used: r.u32()?,
            lanczos_unconverged: r.u32()?,
        };
        r.finish()?;
        let corr_hi = corrs.pop().expect("three");
        let corr_dw = corrs.pop().expect("three");
        let corr_sf = corrs.pop().expect("three");
        Ok(Self {
            cell,
            t,
            u,
            v,
            n_max,
            length,
            particles,
            chi_max,
            dmrg_seed,
            energy,
            spectra,
            central_theta,
            observables: ObservableSet {
                o_sf,
                o_dw,
                o_hi,
                density_profile: density_profile.clone(),
                entropy_profile,
                structure_factor,
                k_star,
            },
            density_profile,
            corr_sf,
            corr_dw,
            corr_hi,
            xi,
            mu2,
            convergence,
            format_version,
        })
    }
}

/// Lowercase hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
