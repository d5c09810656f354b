use crate::error::{Error, Result};

/// Dense activation of one sample: `(channels, spatial...)` with one or two
/// spatial dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorBuffer {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl TensorBuffer {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.len() < 2 || shape.len() > 3 || shape.contains(&0) {
            return Err(Error::Shape(format!("buffer shape {shape:?} is not (C, N) or (C, H, W)")));
        }
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::Shape(format!("shape {shape:?} does not hold {} values", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, vec![0.0; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.shape[0]
    }

    /// Number of spatial dimensions (1 or 2).
    pub fn spatial_rank(&self) -> usize {
        self.shape.len() - 1
    }

    /// `(C, H, W)` with `H = 1` for one spatial dimension.
    pub(crate) fn chw(&self) -> (usize, usize, usize) {
        match self.shape.as_slice() {
            &[c, w] => (c, 1, w),
            &[c, h, w] => (c, h, w),
            _ => unreachable!("validated rank"),
        }
    }

    /// Zero-pads every spatial extent up to a multiple of `m`.
    pub fn pad_to_multiple(&self, m: usize) -> Self {
        let (c, h, w) = self.chw();
        let up = |x: usize| x.div_ceil(m) * m;
        let (nh, nw) = if self.spatial_rank() == 1 { (1, up(w)) } else { (up(h), up(w)) };
        let mut out = vec![0.0; c * nh * nw];
        for ch in 0..c {
            for y in 0..h {
                let src = &self.data[(ch * h + y) * w..(ch * h + y + 1) * w];
                out[(ch * nh + y) * nw..(ch * nh + y) * nw + w].copy_from_slice(src);
            }
        }
        let shape = if self.spatial_rank() == 1 { vec![c, nw] } else { vec![c, nh, nw] };
        Self { shape, data: out }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub(crate) fn add_assign(&mut self, other: &TensorBuffer) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// `sum_v (x_v - y_v)^2 / D` over all `D` entries.
pub fn reconstruction_loss(x: &TensorBuffer, x_bar: &TensorBuffer) -> Result<f64> {
    if x.shape() != x_bar.shape() {
        return Err(Error::Shape(format!("loss of {:?} against {:?}", x.shape(), x_bar.shape())));
    }
    let sum: f64 = x.data.iter().zip(&x_bar.data).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / x.len() as f64)
}
