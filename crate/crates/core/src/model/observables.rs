//! Correlator matrices, order parameters and the density structure factor.

use std::f64::consts::PI;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};

use super::operators::{annihilation, creation, density_fluctuation, number, parity_string, string_start};
use crate::error::{Error, Result};
use crate::tn::MpsState;

/// Which two-point function a correlator matrix holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CorrelatorKind {
    /// `<b+_i b_j>`
    Sf,
    /// `<dn_i (-1)^|i-j| dn_j>`
    Dw,
    /// `<dn_i exp(-i pi sum_{i<=l<j} dn_l) dn_j>`
    Hi,
}

impl FromStr for CorrelatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sf" => Ok(Self::Sf),
            "dw" => Ok(Self::Dw),
            "hi" => Ok(Self::Hi),
            other => Err(Error::Domain(format!("unknown correlator kind '{other}'"))),
        }
    }
}

/// Mean density `N / L` that defines `dn = n - nbar`.
pub fn mean_density(state: &MpsState) -> f64 {
    state.total_particles() as f64 / state.len() as f64
}

/// `L x L` correlator matrix; rows are evaluated for `j >= i` and mirrored.
pub fn correlator_matrix(state: &MpsState, kind: CorrelatorKind) -> Result<Array2<f64>> {
    let l = state.len();
    let d = state.d();
    let nbar = mean_density(state);
    let dn = density_fluctuation(d, nbar);
    let (a, b, string, diag_op) = match kind {
        CorrelatorKind::Sf => (creation(d), annihilation(d), None, number(d)),
        CorrelatorKind::Dw => (dn.clone(), dn.clone(), None, dn.dot(&dn)),
        CorrelatorKind::Hi => (string_start(d, nbar), dn.clone(), Some(parity_string(d, nbar)), dn.dot(&dn)),
    };
    let mut c = Array2::zeros((l, l));
    for i in 0..l {
        c[[i, i]] = state.expect_local(i, diag_op.view())?;
        if i + 1 == l {
            break;
        }
        let row = state.correlation_row(i, a.view(), b.view(), string.as_ref().map(|s| s.view()))?;
        for (k, v) in row.into_iter().enumerate() {
            let j = i + 1 + k;
            let v = if kind == CorrelatorKind::Dw && (j - i) % 2 == 1 { -v } else { v };
            c[[i, j]] = v;
            c[[j, i]] = v;
        }
    }
    Ok(c)
}

/// `sum_ij C(i, j) / L^2`.
pub fn order_parameter(corr: ArrayView2<f64>) -> Result<f64> {
    order_parameter_with_margin(corr, 0)
}

/// Order parameter over the central block that leaves `margin` sites out at
/// both ends.
pub fn order_parameter_with_margin(corr: ArrayView2<f64>, margin: usize) -> Result<f64> {
    let (l, m) = corr.dim();
    if l != m {
        return Err(Error::Shape(format!("correlator matrix must be square, got {l}x{m}")));
    }
    if 2 * margin >= l {
        return Err(Error::Domain(format!("edge margin {margin} leaves no sites of {l}")));
    }
    let inner = corr.slice(ndarray::s![margin..l - margin, margin..l - margin]);
    let n = (l - 2 * margin) as f64;
    Ok(inner.sum() / (n * n))
}

/// `C(margin, L - 1 - margin)`, the correlator at the largest distance kept.
pub fn end_to_end(corr: ArrayView2<f64>, margin: usize) -> Result<f64> {
    let (l, m) = corr.dim();
    if l != m || 2 * margin >= l {
        return Err(Error::Domain(format!("no end-to-end pair in {l}x{m} with margin {margin}")));
    }
    Ok(corr[[margin, l - 1 - margin]])
}

/// Edge margin used by default: `L / 8`.
pub fn default_margin(length: usize) -> usize {
    length / 8
}

/// Peak of `|n(k)|^2` with `n(k) = sum_j <n_j> e^{-ikj} / L` over
/// `k = 2 pi m / L`, `m = 1 .. L-1`. Returns `(S, k*)`; the first maximum wins.
pub fn structure_factor(density: &[f64]) -> Result<(f64, f64)> {
    let l = density.len();
    if l < 2 {
        return Err(Error::Domain("structure factor needs at least two sites".into()));
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    for m in 1..l {
        let k = 2.0 * PI * m as f64 / l as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (j, &n) in density.iter().enumerate() {
            let phase = k * j as f64;
            re += n * phase.cos();
            im -= n * phase.sin();
        }
        let s = (re * re + im * im) / (l * l) as f64;
        if s > best.0 + 1e-14 {
            best = (s, k);
        }
    }
    Ok(best)
}

/// Everything the phase diagram plots for one ground state.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableSet {
    pub o_sf: f64,
    pub o_dw: f64,
    pub o_hi: f64,
    pub density_profile: Vec<f64>,
    /// Entropy (bits) at every inner bond.
    pub entropy_profile: Vec<f64>,
    pub structure_factor: f64,
    pub k_star: f64,
}

/// Correlators plus the derived scalar diagnostics of one state.
#[derive(Clone, Debug)]
pub struct Diagnostics {
    pub corr_sf: Array2<f64>,
    pub corr_dw: Array2<f64>,
    pub corr_hi: Array2<f64>,
    pub observables: ObservableSet,
}

impl Diagnostics {
    /// `margin` sites at each end are left out of the order parameters.
    pub fn compute(state: &MpsState, margin: usize) -> Result<Self> {
        let corr_sf = correlator_matrix(state, CorrelatorKind::Sf)?;
        let corr_dw = correlator_matrix(state, CorrelatorKind::Dw)?;
        let corr_hi = correlator_matrix(state, CorrelatorKind::Hi)?;
        let density_profile = density_profile(state)?;
        let (structure_factor, k_star) = structure_factor(&density_profile)?;
        let observables = ObservableSet {
            o_sf: order_parameter_with_margin(corr_sf.view(), margin)?,
            o_dw: order_parameter_with_margin(corr_dw.view(), margin)?,
            o_hi: order_parameter_with_margin(corr_hi.view(), margin)?,
            density_profile,
            entropy_profile: state.entropy_profile()?,
            structure_factor,
            k_star,
        };
        Ok(Self { corr_sf, corr_dw, corr_hi, observables })
    }
}

/// `<n_i>` at every site.
pub fn density_profile(state: &MpsState) -> Result<Vec<f64>> {
    let n = number(state.d());
    (0..state.len()).map(|i| state.expect_local(i, n.view())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn product(occ: &[usize]) -> MpsState {
        MpsState::product_state(occ, 3, 4).unwrap()
    }

    #[test]
    fn staggered_state_correlators() {
        let s = product(&[2, 0, 2, 0]);
        let dw = correlator_matrix(&s, CorrelatorKind::Dw).unwrap();
        assert!((dw[[1, 2]] - 1.0).abs() < 1e-14);
        assert!(dw.iter().all(|&x| (x - 1.0).abs() < 1e-14));
        assert!((order_parameter(dw.view()).unwrap() - 1.0).abs() < 1e-14);
        let sf = correlator_matrix(&s, CorrelatorKind::Sf).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(sf[[i, j]], 0.0);
                }
            }
        }
        let hi = correlator_matrix(&s, CorrelatorKind::Hi).unwrap();
        for i in 0..3 {
            assert!((hi[[i, i + 1]] - dw[[i, i + 1]]).abs() < 1e-14);
        }
    }

    #[test]
    fn order_parameter_examples() {
        assert_eq!(order_parameter(Array2::ones((4, 4)).view()).unwrap(), 1.0);
        assert_eq!(order_parameter(Array2::zeros((4, 4)).view()).unwrap(), 0.0);
        assert!(order_parameter(Array2::zeros((2, 3)).view()).is_err());
        assert!(order_parameter_with_margin(Array2::zeros((4, 4)).view(), 2).is_err());
    }

    #[test]
    fn structure_factor_examples() {
        let (s, k) = structure_factor(&[2.0, 0.0, 2.0, 0.0]).unwrap();
        assert!((s - 1.0).abs() < 1e-14);
        assert!((k - PI).abs() < 1e-14);
        let (s, _) = structure_factor(&[1.0; 8]).unwrap();
        assert!(s.abs() < 1e-28);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("SF".parse::<CorrelatorKind>().unwrap(), CorrelatorKind::Sf);
        assert!("xx".parse::<CorrelatorKind>().is_err());
    }
}
