//! Single layers on `(C, H, W)` activations; one spatial dimension is the
//! case `H = 1` with kernels and windows of height one.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2};

use super::tensor::TensorBuffer;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv1d,
    Conv2d,
    Relu,
    MaxPool,
    Upsample,
}

impl LayerKind {
    pub(crate) fn code(self) -> u8 {
        match self {
            Self::Conv1d => 1,
            Self::Conv2d => 2,
            Self::Relu => 3,
            Self::MaxPool => 4,
            Self::Upsample => 5,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            1 => Self::Conv1d,
            2 => Self::Conv2d,
            3 => Self::Relu,
            4 => Self::MaxPool,
            5 => Self::Upsample,
            _ => return None,
        })
    }
}

/// Layer description. `filters` and `kernel` matter for convolutions,
/// `pool_size` for pooling and upsampling. Padding is always "same".
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub filters: usize,
    pub kernel: usize,
    pub pool_size: usize,
}

impl LayerSpec {
    pub fn conv1d(filters: usize, kernel: usize) -> Self {
        Self { kind: LayerKind::Conv1d, filters, kernel, pool_size: 2 }
    }

    pub fn conv2d(filters: usize, kernel: usize) -> Self {
        Self { kind: LayerKind::Conv2d, filters, kernel, pool_size: 2 }
    }

    pub fn relu() -> Self {
        Self { kind: LayerKind::Relu, filters: 0, kernel: 0, pool_size: 0 }
    }

    pub fn max_pool(size: usize) -> Self {
        Self { kind: LayerKind::MaxPool, filters: 0, kernel: 0, pool_size: size }
    }

    pub fn upsample(size: usize) -> Self {
        Self { kind: LayerKind::Upsample, filters: 0, kernel: 0, pool_size: size }
    }

    pub fn is_conv(&self) -> bool {
        matches!(self.kind, LayerKind::Conv1d | LayerKind::Conv2d)
    }

    /// Output shape for an input of shape `input`, or a shape error.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let rank = input.len() - 1;
        match self.kind {
            LayerKind::Conv1d | LayerKind::Conv2d => {
                let want = if self.kind == LayerKind::Conv1d { 1 } else { 2 };
                if rank != want {
                    return Err(Error::Shape(format!("{:?} on input {input:?}", self.kind)));
                }
                if self.kernel % 2 == 0 || self.filters == 0 {
                    return Err(Error::Shape(format!("kernel must be odd and filters positive: {self:?}")));
                }
                let mut s = input.to_vec();
                s[0] = self.filters;
                Ok(s)
            }
            LayerKind::Relu => Ok(input.to_vec()),
            LayerKind::MaxPool => {
                let p = self.pool_size;
                if p == 0 || input[1..].iter().any(|&n| n % p != 0) {
                    return Err(Error::Shape(format!("pool size {p} does not divide {input:?}")));
                }
                let mut s = input.to_vec();
                s[1..].iter_mut().for_each(|n| *n /= p);
                Ok(s)
            }
            LayerKind::Upsample => {
                if self.pool_size == 0 {
                    return Err(Error::Shape("upsampling factor must be positive".into()));
                }
                let mut s = input.to_vec();
                s[1..].iter_mut().for_each(|n| *n *= self.pool_size);
                Ok(s)
            }
        }
    }
}

/// A layer with its parameters. Convolution weights are stored as
/// `(C_out, C_in * kh * kw)`; other kinds carry empty arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub in_channels: usize,
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// What a layer's backward pass needs from its forward pass.
#[derive(Clone, Debug)]
pub(crate) enum LayerCache {
    Conv { col: Array2<f64>, in_shape: Vec<usize> },
    Relu { input: TensorBuffer },
    Pool { argmax: Vec<usize>, in_shape: Vec<usize> },
    Upsample { in_shape: Vec<usize> },
}

impl Layer {
    pub fn new(spec: LayerSpec, in_channels: usize) -> Self {
        let (weight, bias) = if spec.is_conv() {
            let kh = if spec.kind == LayerKind::Conv2d { spec.kernel } else { 1 };
            (Array2::zeros((spec.filters, in_channels * kh * spec.kernel)), Array1::zeros(spec.filters))
        } else {
            (Array2::zeros((0, 0)), Array1::zeros(0))
        };
        Self { spec, in_channels, weight, bias }
    }

    fn kernel_hw(&self) -> (usize, usize) {
        match self.spec.kind {
            LayerKind::Conv2d => (self.spec.kernel, self.spec.kernel),
            _ => (1, self.spec.kernel),
        }
    }

    fn window(&self, x: &TensorBuffer) -> (usize, usize) {
        if x.spatial_rank() == 2 {
            (self.spec.pool_size, self.spec.pool_size)
        } else {
            (1, self.spec.pool_size)
        }
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn forward(&self, x: &TensorBuffer) -> Result<TensorBuffer> {
        self.forward_cached(x).map(|(y, _)| y)
    }

    pub(crate) fn forward_cached(&self, x: &TensorBuffer) -> Result<(TensorBuffer, LayerCache)> {
        let out_shape = self.spec.output_shape(x.shape())?;
        match self.spec.kind {
            LayerKind::Conv1d | LayerKind::Conv2d => {
                if x.channels() != self.in_channels {
                    return Err(Error::Shape(format!(
                        "convolution expects {} channels, got {}",
                        self.in_channels,
                        x.channels()
                    )));
                }
                let col = im2col(x, self.kernel_hw());
                let (_, h, w) = x.chw();
                let mut out = Array2::zeros((self.spec.filters, h * w));
                for (mut row, &b) in out.rows_mut().into_iter().zip(&self.bias) {
                    row.fill(b);
                }
                general_mat_mul(1.0, &self.weight, &col, 1.0, &mut out);
                let y = TensorBuffer::new(out_shape, out.into_raw_vec_and_offset().0)?;
                Ok((y, LayerCache::Conv { col, in_shape: x.shape().to_vec() }))
            }
            LayerKind::Relu => {
                let data = x.data().iter().map(|&v| v.max(0.0)).collect();
                Ok((TensorBuffer::new(out_shape, data)?, LayerCache::Relu { input: x.clone() }))
            }
            LayerKind::MaxPool => {
                let (c, h, w) = x.chw();
                let (ph, pw) = self.window(x);
                let (oh, ow) = (h / ph, w / pw);
                let mut data = Vec::with_capacity(c * oh * ow);
                let mut argmax = Vec::with_capacity(c * oh * ow);
                let xd = x.data();
                for ch in 0..c {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut best = usize::MAX;
                            for dy in 0..ph {
                                for dx in 0..pw {
                                    let at = (ch * h + oy * ph + dy) * w + ox * pw + dx;
                                    // first maximum wins on ties
                                    if best == usize::MAX || xd[at] > xd[best] {
                                        best = at;
                                    }
                                }
                            }
                            data.push(xd[best]);
                            argmax.push(best);
                        }
                    }
                }
                let y = TensorBuffer::new(out_shape, data)?;
                Ok((y, LayerCache::Pool { argmax, in_shape: x.shape().to_vec() }))
            }
            LayerKind::Upsample => {
                let (c, h, w) = x.chw();
                let (fh, fw) = self.window(x);
                let (oh, ow) = (h * fh, w * fw);
                let xd = x.data();
                let mut data = Vec::with_capacity(c * oh * ow);
                for ch in 0..c {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            data.push(xd[(ch * h + oy / fh) * w + ox / fw]);
                        }
                    }
                }
                Ok((TensorBuffer::new(out_shape, data)?, LayerCache::Upsample { in_shape: x.shape().to_vec() }))
            }
        }
    }

    /// Gradient with respect to the input; parameter gradients are added to
    /// `grad_w` and `grad_b` (convolutions only).
    pub(crate) fn backward(
        &self,
        cache: &LayerCache,
        g: &TensorBuffer,
        grad_w: &mut Array2<f64>,
        grad_b: &mut Array1<f64>,
    ) -> Result<TensorBuffer> {
        match (self.spec.kind, cache) {
            (LayerKind::Conv1d | LayerKind::Conv2d, LayerCache::Conv { col, in_shape }) => {
                let (co, _, _) = g.chw();
                let gm = ArrayView2::from_shape((co, g.len() / co), g.data()).expect("contiguous");
                general_mat_mul(1.0, &gm, &col.t(), 1.0, grad_w);
                *grad_b += &gm.sum_axis(ndarray::Axis(1));
                let gcol = self.weight.t().dot(&gm);
                col2im(&gcol, in_shape, self.kernel_hw())
            }
            (LayerKind::Relu, LayerCache::Relu { input }) => {
                let data = input.data().iter().zip(g.data()).map(|(&x, &d)| if x > 0.0 { d } else { 0.0 }).collect();
                TensorBuffer::new(input.shape().to_vec(), data)
            }
            (LayerKind::MaxPool, LayerCache::Pool { argmax, in_shape }) => {
                let mut out = TensorBuffer::zeros(in_shape.clone())?;
                let od = out.data_mut();
                for (&at, &d) in argmax.iter().zip(g.data()) {
                    od[at] += d;
                }
                Ok(out)
            }
            (LayerKind::Upsample, LayerCache::Upsample { in_shape }) => {
                let mut out = TensorBuffer::zeros(in_shape.clone())?;
                let (c, h, w) = out.chw();
                let (fh, fw) = if in_shape.len() == 3 { (self.spec.pool_size, self.spec.pool_size) } else { (1, self.spec.pool_size) };
                let (oh, ow) = (h * fh, w * fw);
                let od = out.data_mut();
                let gd = g.data();
                for ch in 0..c {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            od[(ch * h + oy / fh) * w + ox / fw] += gd[(ch * oh + oy) * ow + ox];
                        }
                    }
                }
                Ok(out)
            }
            _ => Err(Error::Invariant("layer cache does not belong to this layer".into())),
        }
    }
}

/// Columns of zero-padded `kh x kw` patches: row `(c, i, j)`, column `(y, x)`.
fn im2col(x: &TensorBuffer, (kh, kw): (usize, usize)) -> Array2<f64> {
    let (c, h, w) = x.chw();
    let (ph, pw) = (kh / 2, kw / 2);
    let xd = x.data();
    let mut col = Array2::zeros((c * kh * kw, h * w));
    let cd = col.as_slice_mut().expect("standard layout");
    for ch in 0..c {
        for i in 0..kh {
            for j in 0..kw {
                let row = ((ch * kh + i) * kw + j) * h * w;
                for y in 0..h {
                    let sy = y as isize + i as isize - ph as isize;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for xx in 0..w {
                        let sx = xx as isize + j as isize - pw as isize;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        cd[row + y * w + xx] = xd[(ch * h + sy as usize) * w + sx as usize];
                    }
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`].
fn col2im(col: &Array2<f64>, shape: &[usize], (kh, kw): (usize, usize)) -> Result<TensorBuffer> {
    let mut out = TensorBuffer::zeros(shape.to_vec())?;
    let (c, h, w) = out.chw();
    let (ph, pw) = (kh / 2, kw / 2);
    let cd = col.as_slice().expect("standard layout");
    let od = out.data_mut();
    for ch in 0..c {
        for i in 0..kh {
            for j in 0..kw {
                let row = ((ch * kh + i) * kw + j) * h * w;
                for y in 0..h {
                    let sy = y as isize + i as isize - ph as isize;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for xx in 0..w {
                        let sx = xx as isize + j as isize - pw as isize;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        od[(ch * h + sy as usize) * w + sx as usize] += cd[row + y * w + xx];
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn buf(shape: &[usize], data: &[f64]) -> TensorBuffer {
        TensorBuffer::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn conv1d_by_hand() {
        let mut l = Layer::new(LayerSpec::conv1d(1, 3), 1);
        l.weight = ndarray::array![[1.0, 0.0, -1.0]];
        let y = l.forward(&buf(&[1, 4], &[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(y.data(), &[-2.0, -2.0, -2.0, 3.0]);
    }

    #[test]
    fn pool_relu_upsample_by_hand() {
        let pool = Layer::new(LayerSpec::max_pool(2), 1);
        assert_eq!(pool.forward(&buf(&[1, 4], &[1.0, 3.0, 2.0, 5.0])).unwrap().data(), &[3.0, 5.0]);
        let relu = Layer::new(LayerSpec::relu(), 1);
        assert_eq!(relu.forward(&buf(&[1, 2], &[-1.0, 2.0])).unwrap().data(), &[0.0, 2.0]);
        let up = Layer::new(LayerSpec::upsample(2), 1);
        let y = up.forward(&buf(&[1, 2, 1], &[1.0, 2.0])).unwrap();
        assert_eq!(y.shape(), &[1, 4, 2]);
        assert_eq!(y.data(), &[1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]);
        assert!(pool.forward(&buf(&[1, 3], &[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn conv2d_same_padding() {
        let mut l = Layer::new(LayerSpec::conv2d(1, 3), 1);
        // center tap only: identity
        l.weight[[0, 4]] = 1.0;
        let x = buf(&[1, 2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(l.forward(&x).unwrap(), x);
        // shift right by one: output(y, x) = input(y, x - 1)
        l.weight[[0, 4]] = 0.0;
        l.weight[[0, 3]] = 1.0;
        assert_eq!(l.forward(&x).unwrap().data(), &[0.0, 1.0, 2.0, 0.0, 4.0, 5.0]);
        assert!(l.forward(&buf(&[2, 2, 3], &[0.0; 12])).is_err());
    }
}
