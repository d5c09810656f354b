//! Thin wrappers around nalgebra's dense decompositions, converting to and
//! from `ndarray` and returning factors sorted by decreasing value.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2};

fn to_na(m: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

/// Thin SVD `m = u * diag(s) * vt` with `s` descending.
pub(crate) fn svd_sorted(m: ArrayView2<f64>) -> (Array2<f64>, Vec<f64>, Array2<f64>) {
    let (r, c) = m.dim();
    let k = r.min(c);
    let svd = to_na(m).svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u_out = Array2::from_shape_fn((r, k), |(i, j)| u[(i, order[j])]);
    let vt_out = Array2::from_shape_fn((k, c), |(i, j)| vt[(order[i], j)]);
    (u_out, s, vt_out)
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending.
/// Column `j` of the returned matrix is the eigenvector of value `j`.
pub(crate) fn eigh_descending(m: ArrayView2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = m.nrows();
    let sym = to_na(m);
    let sym = (&sym + sym.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = Array2::from_shape_fn((n, n), |(i, j)| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// Lowest eigenpair of a small symmetric matrix.
pub(crate) fn eigh_lowest(m: ArrayView2<f64>) -> (f64, Vec<f64>) {
    let (vals, vecs) = eigh_descending(m);
    let last = vals.len() - 1;
    (vals[last], vecs.column(last).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn svd_reconstructs_and_sorts() {
        let m = array![[1.0, 2.0, 0.0], [0.0, 3.0, 1.0]];
        let (u, s, vt) = svd_sorted(m.view());
        assert!(s[0] >= s[1]);
        let mut rec = Array2::<f64>::zeros((2, 3));
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..3 {
                    rec[[i, j]] += u[[i, k]] * s[k] * vt[[k, j]];
                }
            }
        }
        assert!((&rec - &m).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn eigh_orders_descending() {
        let m = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = eigh_descending(m.view());
        assert!((vals[0] - 3.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        assert!((vecs[[0, 0]].abs() - 0.5f64.sqrt()).abs() < 1e-12);
        let (e, _) = eigh_lowest(m.view());
        assert!((e - 1.0).abs() < 1e-12);
    }
}
