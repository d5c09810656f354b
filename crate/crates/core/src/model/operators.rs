//! Single-site operators in the occupation basis `|0>, ..., |n_max>`,
//! indexed `op[[bra, ket]]`.

use ndarray::Array2;

/// `b+` truncated to `d` levels.
pub fn creation(d: usize) -> Array2<f64> {
    let mut m = Array2::zeros((d, d));
    for n in 0..d - 1 {
        m[[n + 1, n]] = ((n + 1) as f64).sqrt();
    }
    m
}

/// `b` truncated to `d` levels.
pub fn annihilation(d: usize) -> Array2<f64> {
    creation(d).reversed_axes()
}

pub fn number(d: usize) -> Array2<f64> {
    diag(d, |n| n as f64)
}

/// `n (n - 1) / 2`; the on-site energy per unit `U`.
pub fn pair_count(d: usize) -> Array2<f64> {
    diag(d, |n| (n * n.saturating_sub(1)) as f64 / 2.0)
}

/// `dn = n - nbar`.
pub fn density_fluctuation(d: usize, nbar: f64) -> Array2<f64> {
    diag(d, |n| n as f64 - nbar)
}

/// `cos(pi dn)`, the real form of `exp(-i pi dn)` on integer `dn`.
pub fn parity_string(d: usize, nbar: f64) -> Array2<f64> {
    diag(d, |n| (std::f64::consts::PI * (n as f64 - nbar)).cos())
}

/// `dn cos(pi dn)`: the first site of the string correlator, which carries
/// both its own fluctuation and its string factor.
pub fn string_start(d: usize, nbar: f64) -> Array2<f64> {
    diag(d, |n| {
        let dn = n as f64 - nbar;
        dn * (std::f64::consts::PI * dn).cos()
    })
}

fn diag(d: usize, f: impl Fn(usize) -> f64) -> Array2<f64> {
    let mut m = Array2::zeros((d, d));
    for n in 0..d {
        m[[n, n]] = f(n);
    }
    m
}
