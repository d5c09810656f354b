use crate::dmrg::DmrgConfig;
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Grid cell `(iu, iv)`: index along U, index along V.
pub type Cell = (usize, usize);

/// Rectangular grid over the (U, V) plane. Both ranges are closed and
/// include their end points.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    pub n_u: usize,
    pub n_v: usize,
    pub model: ModelParams,
    pub dmrg: DmrgConfig,
    /// Particle number; `None` is unit filling `N = L`.
    pub particles: Option<i32>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            u_range: (0.0, 5.0),
            v_range: (0.0, 5.0),
            n_u: 15,
            n_v: 15,
            model: ModelParams::default(),
            dmrg: DmrgConfig::default(),
            particles: None,
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_u < 2 || self.n_v < 2 {
            return Err(Error::Config("grid needs at least two points per axis".into()));
        }
        let ok = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a < b;
        if !ok(self.u_range) || !ok(self.v_range) {
            return Err(Error::Config(format!("degenerate grid ranges {:?} x {:?}", self.u_range, self.v_range)));
        }
        self.model.validate()?;
        self.dmrg.validate()?;
        self.model.check_filling(self.particles())
    }

    pub fn particles(&self) -> i32 {
        self.particles.unwrap_or(self.model.length as i32)
    }

    pub fn u(&self, iu: usize) -> f64 {
        let (a, b) = self.u_range;
        a + (b - a) * iu as f64 / (self.n_u - 1) as f64
    }

    pub fn v(&self, iv: usize) -> f64 {
        let (a, b) = self.v_range;
        a + (b - a) * iv as f64 / (self.n_v - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.n_u * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All cells, U index outermost.
    pub fn cells(&self) -> Vec<Cell> {
        (0..self.n_u).flat_map(|iu| (0..self.n_v).map(move |iv| (iu, iv))).collect()
    }

    /// Row-major position of a cell.
    pub fn index(&self, (iu, iv): Cell) -> usize {
        iu * self.n_v + iv
    }

    pub fn params(&self, (iu, iv): Cell) -> ModelParams {
        self.model.with_uv(self.u(iu), self.v(iv))
    }

    /// Cells whose (U, V) lie in the closed box, with a small tolerance for
    /// grid points that sit on the boundary.
    pub fn cells_in(&self, u: (f64, f64), v: (f64, f64)) -> Vec<Cell> {
        let eps = 1e-9;
        self.cells()
            .into_iter()
            .filter(|&(iu, iv)| {
                let (x, y) = (self.u(iu), self.v(iv));
                x >= u.0 - eps && x <= u.1 + eps && y >= v.0 - eps && y <= v.1 + eps
            })
            .collect()
    }

    /// Cell nearest to (U, V).
    pub fn nearest(&self, u: f64, v: f64) -> Cell {
        let pick = |x: f64, (a, b): (f64, f64), n: usize| {
            let t = ((x - a) / (b - a) * (n - 1) as f64).round();
            t.clamp(0.0, (n - 1) as f64) as usize
        };
        (pick(u, self.u_range, self.n_u), pick(v, self.v_range, self.n_v))
    }
}
