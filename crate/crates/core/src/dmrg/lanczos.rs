use ndarray::{s, Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::tn::linalg::eigh_lowest;

/// Lowest Ritz pair of a symmetric operator.
#[derive(Clone, Debug)]
pub struct LanczosResult {
    pub energy: f64,
    /// Unit-norm Ritz vector.
    pub vector: Vec<f64>,
    pub iterations: usize,
    /// Estimated residual norm `|H v - E v|`.
    pub residual: f64,
    /// False when the iteration cap was hit before the residual test passed.
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lanczos with full reorthogonalization against every stored basis vector.
///
/// Stops when `|H v - E v| <= tol * max(1, |E|)`, on breakdown (an invariant
/// subspace was found) or after `iters` steps.
pub fn lanczos_ground(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    start: &[f64],
    iters: usize,
    tol: f64,
) -> Result<LanczosResult> {
    let n = start.len();
    let norm = dot(start, start).sqrt();
    if n == 0 || !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Domain("Lanczos needs a finite nonzero start vector".into()));
    }
    let iters = iters.max(1).min(n);
    // Lanczos vectors as rows; only the first `m` rows are in use.
    let mut basis = Array2::<f64>::zeros((iters, n));
    basis.row_mut(0).assign(&ArrayView1::from(start).mapv(|x| x / norm));
    let mut m = 1;
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = Array1::<f64>::zeros(n);
    let mut best = (0.0, vec![1.0]);
    let mut residual = f64::INFINITY;
    let mut converged = false;

    for k in 0..iters {
        w.fill(0.0);
        apply(basis.row(k).as_slice().unwrap(), w.as_slice_mut().unwrap());
        let alpha = basis.row(k).dot(&w);
        alphas.push(alpha);
        w.scaled_add(-alpha, &basis.row(k));
        if k > 0 {
            w.scaled_add(-betas[k - 1], &basis.row(k - 1));
        }
        // classical Gram-Schmidt, repeated once when it removed most of w
        let used = basis.slice(s![..m, ..]);
        for _ in 0..2 {
            let before = w.dot(&w);
            let c = used.dot(&w);
            for (v, &ci) in used.rows().into_iter().zip(&c) {
                w.scaled_add(-ci, &v);
            }
            if w.dot(&w) > 0.5 * before {
                break;
            }
        }
        let beta = w.dot(&w).sqrt();

        let t = Array2::from_shape_fn((m, m), |(i, j)| {
            if i == j {
                alphas[i]
            } else if i + 1 == j {
                betas[i]
            } else if j + 1 == i {
                betas[j]
            } else {
                0.0
            }
        });
        best = eigh_lowest(t.view());
        residual = beta * best.1[k].abs();
        let scale = best.0.abs().max(1.0);
        let breakdown = beta <= 1e-13 * scale;
        if residual <= tol * scale || breakdown {
            converged = true;
            break;
        }
        if k + 1 < iters {
            betas.push(beta);
            basis.row_mut(m).assign(&(&w / beta));
            m += 1;
        }
    }

    let coeffs = ArrayView1::from(&best.1[..]);
    let mut vector = Array1::<f64>::zeros(n);
    for (v, &ci) in basis.rows().into_iter().zip(coeffs) {
        vector.scaled_add(ci, &v);
    }
    let vn = vector.dot(&vector).sqrt();
    vector /= vn;
    Ok(LanczosResult { energy: best.0, vector: vector.to_vec(), iterations: alphas.len(), residual, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_apply(m: &Array2<f64>) -> impl FnMut(&[f64], &mut [f64]) + '_ {
        move |x, y| {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = (0..x.len()).map(|j| m[[i, j]] * x[j]).sum();
            }
        }
    }

    #[test]
    fn diagonal_map() {
        let m = Array2::from_diag(&ndarray::arr1(&[1.0, 2.0, 3.0]));
        let r = lanczos_ground(dense_apply(&m), &[1.0, 1.0, 1.0], 40, 1e-12).unwrap();
        assert!((r.energy - 1.0).abs() < 1e-12);
        assert!((r.vector[0].abs() - 1.0).abs() < 1e-10);
        assert!(r.converged);
    }

    #[test]
    fn pauli_x() {
        let m = ndarray::array![[0.0, 1.0], [1.0, 0.0]];
        let r = lanczos_ground(dense_apply(&m), &[1.0, 0.0], 40, 1e-12).unwrap();
        assert!((r.energy + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_start_is_rejected() {
        let m = Array2::<f64>::eye(2);
        assert!(lanczos_ground(dense_apply(&m), &[0.0, 0.0], 10, 1e-10).is_err());
    }

    #[test]
    fn breakdown_returns_exact_pair() {
        // start vector is an eigenvector: one step spans an invariant subspace
        let m = Array2::from_diag(&ndarray::arr1(&[4.0, 2.0, 3.0]));
        let r = lanczos_ground(dense_apply(&m), &[0.0, 1.0, 0.0], 40, 1e-12).unwrap();
        assert_eq!(r.iterations, 1);
        assert!((r.energy - 2.0).abs() < 1e-14);
    }
}
