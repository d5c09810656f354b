use crate::error::{Error, Result};

/// Couplings and lattice of the extended Bose-Hubbard chain
/// `H = -t sum (b+_i b_{i+1} + h.c.) + U/2 sum n_i (n_i - 1) + V sum n_i n_{i+1}`
/// with open boundaries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub t: f64,
    pub u: f64,
    pub v: f64,
    pub n_max: usize,
    pub length: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { t: 1.0, u: 0.0, v: 0.0, n_max: 3, length: 32 }
    }
}

impl ModelParams {
    pub fn new(t: f64, u: f64, v: f64, n_max: usize, length: usize) -> Result<Self> {
        let p = Self { t, u, v, n_max, length };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t >= 0.0) || !self.u.is_finite() || !self.v.is_finite() || !self.t.is_finite() {
            return Err(Error::Domain(format!("invalid couplings t={} U={} V={}", self.t, self.u, self.v)));
        }
        if self.n_max < 1 {
            return Err(Error::Domain("n_max must be at least 1".into()));
        }
        if self.length < 2 {
            return Err(Error::Domain("need at least two sites".into()));
        }
        Ok(())
    }

    /// Local dimension `n_max + 1`.
    pub fn d(&self) -> usize {
        self.n_max + 1
    }

    pub fn with_uv(&self, u: f64, v: f64) -> Self {
        Self { u, v, ..*self }
    }

    /// Whether `n` particles fit on the chain.
    pub fn check_filling(&self, n: i32) -> Result<()> {
        if n < 0 || n as usize > self.length * self.n_max {
            return Err(Error::Domain(format!(
                "{n} particles do not fit on {} sites with n_max={}",
                self.length, self.n_max
            )));
        }
        Ok(())
    }
}
