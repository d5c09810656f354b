//! Dense oracles shared by the integration tests. Nothing here calls the
//! contraction routines under test.

#![allow(dead_code)]

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, Array3, Axis};
use phasescout::ae::{AeModel, TensorBuffer};
use phasescout::dmrg::DenseState;
use phasescout::model::operators::{annihilation, creation, density_fluctuation, number, parity_string};
use phasescout::model::CorrelatorKind;
use phasescout::tn::MpsState;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Full coefficient vector of an MPS by dense contraction of every Gamma
/// and Lambda. Index: site 0 is the most significant base-d digit.
pub fn dense_coefficients(state: &MpsState) -> Vec<f64> {
    let l = state.len();
    let d = state.d();
    let lambda_dense = |bond: usize| -> Array1<f64> {
        let mut v = Vec::new();
        for (_, vals) in state.lambda(bond).by_sector() {
            v.extend(vals);
        }
        Array1::from(v)
    };
    // psi has shape (configs so far, right bond)
    let mut psi = Array2::from_shape_vec((1, 1), vec![lambda_dense(0)[0]]).unwrap();
    for i in 0..l {
        let g: Array3<f64> = state.gamma(i).to_dense().into_dimensionality().unwrap();
        let lam = lambda_dense(i + 1);
        let (dl, _, dr) = g.dim();
        assert_eq!(psi.ncols(), dl);
        let mut next = Array2::zeros((psi.nrows() * d, dr));
        for c in 0..psi.nrows() {
            for s in 0..d {
                let gs = g.index_axis(Axis(1), s);
                let row = psi.row(c).dot(&gs) * &lam;
                next.row_mut(c * d + s).assign(&row);
            }
        }
        psi = next;
    }
    psi.column(0).to_vec()
}

pub fn config_of(index: usize, l: usize, d: usize) -> Vec<usize> {
    let mut c = vec![0; l];
    let mut k = index;
    for i in (0..l).rev() {
        c[i] = k % d;
        k /= d;
    }
    c
}

pub fn index_of(config: &[usize], d: usize) -> usize {
    config.iter().fold(0, |acc, &s| acc * d + s)
}

/// `<psi| prod_k O_k |psi>` on a dense vector, single-site operators on
/// distinct sites.
pub fn dense_expect(psi: &[f64], l: usize, d: usize, ops: &[(usize, Array2<f64>)]) -> f64 {
    let mut total = 0.0;
    for (k, &ck) in psi.iter().enumerate() {
        if ck == 0.0 {
            continue;
        }
        let mut branches = vec![(config_of(k, l, d), ck)];
        for (site, op) in ops {
            let mut next = Vec::new();
            for (cfg, amp) in branches {
                for sb in 0..d {
                    let w = op[[sb, cfg[*site]]];
                    if w != 0.0 {
                        let mut c = cfg.clone();
                        c[*site] = sb;
                        next.push((c, amp * w));
                    }
                }
            }
            branches = next;
        }
        for (cfg, amp) in branches {
            total += amp * psi[index_of(&cfg, d)];
        }
    }
    total
}

pub fn dense_norm_squared(psi: &[f64]) -> f64 {
    psi.iter().map(|x| x * x).sum()
}

/// Schmidt values of a dense vector across the cut after `bond` sites.
pub fn dense_schmidt(psi: &[f64], l: usize, d: usize, bond: usize) -> Vec<f64> {
    let rows = d.pow(bond as u32);
    let cols = d.pow((l - bond) as u32);
    let m = DMatrix::from_row_slice(rows, cols, psi);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().filter(|&x| x > 1e-12).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Correlator matrix of the ED ground state, every entry from products of
/// single-site operators.
pub fn ed_correlator(gs: &DenseState, d: usize, kind: CorrelatorKind) -> Array2<f64> {
    let l = gs.basis.length;
    let nbar = gs.basis.particles as f64 / l as f64;
    let dn = density_fluctuation(d, nbar);
    let string = parity_string(d, nbar);
    let mut c = Array2::zeros((l, l));
    for i in 0..l {
        for j in 0..l {
            let (a, b) = (i.min(j), i.max(j));
            c[[i, j]] = match kind {
                CorrelatorKind::Sf if i == j => gs.expect_product(&[(i, number(d).view())]),
                CorrelatorKind::Sf => gs.expect_product(&[(j, annihilation(d).view()), (i, creation(d).view())]),
                _ if i == j => gs.expect_product(&[(i, dn.dot(&dn).view())]),
                CorrelatorKind::Dw => {
                    let sign = if (b - a) % 2 == 1 { -1.0 } else { 1.0 };
                    sign * gs.expect_product(&[(a, dn.view()), (b, dn.view())])
                }
                CorrelatorKind::Hi => {
                    let mut ops = vec![(a, dn.dot(&string)), (b, dn.clone())];
                    ops.extend((a + 1..b).map(|l| (l, string.clone())));
                    let views: Vec<_> = ops.iter().map(|(s, o)| (*s, o.view())).collect();
                    gs.expect_product(&views)
                }
            };
        }
    }
    c
}

pub fn max_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a - b).iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn random_buffer(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> TensorBuffer {
    let n = shape.iter().product();
    TensorBuffer::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn randomize(model: &mut AeModel, rng: &mut ChaCha8Rng) {
    let p: Vec<f64> = (0..model.num_params()).map(|_| rng.random_range(-0.5..0.5)).collect();
    model.set_params(&p).unwrap();
}

/// Largest relative error between analytic and central-difference
/// gradients over all parameters; relative to max(|a|, |fd|, 1e-6).
pub fn worst_gradient_error(model: &AeModel, x: &TensorBuffer, h: f64) -> (f64, usize) {
    let (_, grads) = model.loss_and_gradients(x).unwrap();
    let analytic = grads.flatten();
    let base = model.params();
    let mut probe = model.clone();
    let mut worst = (0.0f64, 0);
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_params(&p).unwrap();
        let up = probe.loss(x).unwrap();
        p[i] = base[i] - h;
        probe.set_params(&p).unwrap();
        let down = probe.loss(x).unwrap();
        let fd = (up - down) / (2.0 * h);
        let rel = (fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(1e-6);
        if rel > worst.0 {
            worst = (rel, i);
        }
    }
    worst
}
