//! Diagnostics that need more than one state or a transfer map: the charge
//! gap, the correlation length and fidelity scans.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use ndarray::Array2;
use rayon::prelude::*;

use super::params::ModelParams;
use crate::dmrg::{run_dmrg, ConvergenceReport, DmrgConfig};
use crate::error::{Error, Result};
use crate::tn::site::{self, Env, SiteMatrices};
use crate::tn::MpsState;

/// `E_C = E(N+1) + E(N-1) - 2 E(N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChargeGapResult {
    pub e_c: f64,
    /// `[E(N-1), E(N), E(N+1)]`
    pub energies: [f64; 3],
    pub reports: [ConvergenceReport; 3],
}

impl ChargeGapResult {
    pub fn converged(&self) -> bool {
        self.reports.iter().all(|r| r.converged)
    }
}

/// Runs the three sectors around `n` in parallel.
pub fn charge_gap(params: &ModelParams, config: &DmrgConfig, n: i32) -> Result<ChargeGapResult> {
    params.check_filling(n - 1)?;
    params.check_filling(n + 1)?;
    let runs: Vec<Result<ConvergenceReport>> =
        [n - 1, n, n + 1].into_par_iter().map(|k| run_dmrg(params, config, k, None).map(|(_, r)| r)).collect();
    let mut reports = Vec::with_capacity(3);
    for r in runs {
        reports.push(r?);
    }
    let reports: [ConvergenceReport; 3] = reports.try_into().expect("three sectors");
    let energies = [reports[0].final_energy, reports[1].final_energy, reports[2].final_energy];
    Ok(ChargeGapResult { e_c: energies[2] + energies[0] - 2.0 * energies[1], energies, reports })
}

/// Correlation length from the transfer map of a central window.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationLengthResult {
    pub xi: f64,
    /// Second largest over largest singular value of the window map.
    pub mu2: f64,
    pub window: usize,
}

/// Default transfer-map window.
pub const DEFAULT_WINDOW: usize = 8;

/// Builds the map `X -> sum_s C^s X C^s^T` over `window` central sites with
/// `C = Lambda^{1/2} Gamma Lambda Gamma ... Gamma Lambda^{1/2}`, which sends
/// `Lambda_right` to `Lambda_left` with unit gain, and compares its two
/// largest singular values. The window is centered, `2 <= W <= L/2`.
pub fn correlation_length(state: &MpsState, window: usize) -> Result<CorrelationLengthResult> {
    let l = state.len();
    if window < 2 || window > l / 2 {
        return Err(Error::Domain(format!("window {window} outside [2, {}]", l / 2)));
    }
    let start = (l - window) / 2;
    let sqrt_lambda = |bond: usize| -> BTreeMap<i32, Vec<f64>> {
        state.lambda(bond).by_sector().into_iter().map(|(q, v)| (q, v.into_iter().map(f64::sqrt).collect())).collect()
    };
    let mut sites: Vec<SiteMatrices> = Vec::with_capacity(window);
    for i in start..start + window {
        let mut s = if i == start { state.site(i) } else { state.left_site(i) };
        if i == start {
            s.scale_rows(&sqrt_lambda(i));
        }
        if i + 1 == start + window {
            s.scale_cols(&sqrt_lambda(i + 1));
        }
        sites.push(s);
    }
    let left_leg = sites[0].left.clone();
    let ident = Array2::eye(state.d());

    // one dense block of the map per charge offset q_bra - q_ket
    let mut values: Vec<f64> = Vec::new();
    let sectors: Vec<(i32, usize)> = left_leg.sectors().collect();
    for delta in -1..=1 {
        let mut columns: Vec<Env> = Vec::new();
        for &(qk, gk) in &sectors {
            let qb = qk + delta;
            let Some(gb) = left_leg.sector_dim(qb) else { continue };
            for a in 0..gb {
                for b in 0..gk {
                    let mut x = Array2::zeros((gb, gk));
                    x[[a, b]] = 1.0;
                    let mut env: Env = BTreeMap::new();
                    env.insert((qb, qk), x);
                    for s in &sites {
                        env = site::transfer(&env, s, s, ident.view());
                    }
                    columns.push(env);
                }
            }
        }
        if columns.is_empty() {
            continue;
        }
        // row index over the output blocks that actually occur
        let mut rows: BTreeMap<(i32, i32), (usize, usize, usize)> = BTreeMap::new();
        let mut n_rows = 0;
        for env in &columns {
            for (&key, m) in env {
                rows.entry(key).or_insert_with(|| {
                    let at = n_rows;
                    n_rows += m.len();
                    (at, m.nrows(), m.ncols())
                });
            }
        }
        if n_rows == 0 {
            continue;
        }
        let mut k = DMatrix::<f64>::zeros(n_rows, columns.len());
        for (c, env) in columns.iter().enumerate() {
            for (key, m) in env {
                let at = rows[key].0;
                for (r, &v) in m.iter().enumerate() {
                    k[(at + r, c)] = v;
                }
            }
        }
        values.extend(k.singular_values().iter().copied());
    }
    values.sort_by(|a, b| b.total_cmp(a));
    let top = values.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return Err(Error::DegenerateState);
    }
    let mu2 = values.get(1).copied().unwrap_or(0.0) / top;
    let xi = if mu2 < 1e-14 { 0.0 } else { -(window as f64) / mu2.ln() };
    Ok(CorrelationLengthResult { xi, mu2, window })
}

/// Pairwise overlaps of the ground states along a cut.
#[derive(Clone, Debug)]
pub struct FidelityScan {
    /// `F(i, j) = |<psi_i|psi_j>|`, symmetric with unit diagonal.
    pub matrix: Array2<f64>,
    pub reports: Vec<ConvergenceReport>,
}

impl FidelityScan {
    /// `F(i, i+1)` along the cut.
    pub fn off_diagonal(&self) -> Vec<f64> {
        (0..self.matrix.nrows().saturating_sub(1)).map(|i| self.matrix[[i, i + 1]]).collect()
    }
}

/// Ground states at every point of `cut` (in parallel), then all overlaps.
pub fn fidelity_scan(cut: &[ModelParams], config: &DmrgConfig, n: i32) -> Result<FidelityScan> {
    let Some(first) = cut.first() else {
        return Err(Error::Domain("empty fidelity cut".into()));
    };
    if cut.iter().any(|p| p.length != first.length || p.n_max != first.n_max) {
        return Err(Error::Domain("all points of a fidelity cut must share L and n_max".into()));
    }
    let runs: Vec<Result<(MpsState, ConvergenceReport)>> =
        cut.par_iter().map(|p| run_dmrg(p, config, n, None)).collect();
    let mut states = Vec::with_capacity(cut.len());
    let mut reports = Vec::with_capacity(cut.len());
    for r in runs {
        let (s, rep) = r?;
        states.push(s);
        reports.push(rep);
    }
    fidelity_matrix(&states).map(|matrix| FidelityScan { matrix, reports })
}

/// `|<psi_i|psi_j>|` for every pair of states.
pub fn fidelity_matrix(states: &[MpsState]) -> Result<Array2<f64>> {
    let m = states.len();
    let mut f = Array2::eye(m);
    for i in 0..m {
        for j in i + 1..m {
            let v = states[i].overlap(&states[j])?;
            f[[i, j]] = v;
            f[[j, i]] = v;
        }
    }
    Ok(f)
}
