use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{Layer, LayerCache, LayerKind, LayerSpec};
use super::tensor::{reconstruction_loss, TensorBuffer};
use crate::error::{Error, Result};

static STAMPS: AtomicU64 = AtomicU64::new(1);

fn next_stamp() -> u64 {
    STAMPS.fetch_add(1, Ordering::Relaxed)
}

/// Which shortcut connections the standard architecture carries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ShortcutMode {
    None,
    /// Encoder output at half resolution into the first decoder conv.
    #[default]
    Inner,
    /// `Inner` plus the full-resolution encoder activation into the last conv.
    Full,
}

impl std::str::FromStr for ShortcutMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "off" => Ok(Self::None),
            "inner" => Ok(Self::Inner),
            "full" => Ok(Self::Full),
            _ => Err(Error::Config(format!("unknown shortcut mode {s:?}"))),
        }
    }
}

/// Width and shortcut settings of the standard two-stage architecture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArchConfig {
    pub filters: usize,
    pub kernel: usize,
    pub shortcuts: ShortcutMode,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self { filters: 64, kernel: 3, shortcuts: ShortcutMode::Inner }
    }
}

/// Convolutional autoencoder as a chain of layers. Activation `a_0` is the
/// input and `a_{k+1} = L_k(a_k + sum of shortcut sources into k)`; a
/// shortcut `(s, k)` adds activation `a_s` to the input of layer `k`.
#[derive(Clone, Debug)]
pub struct AeModel {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    shortcuts: Vec<(usize, usize)>,
    /// Free-form annotations carried through checkpoints.
    pub metadata: BTreeMap<String, String>,
    stamp: u64,
}

impl PartialEq for AeModel {
    fn eq(&self, other: &Self) -> bool {
        self.input_shape == other.input_shape
            && self.layers == other.layers
            && self.shortcuts == other.shortcuts
            && self.metadata == other.metadata
    }
}

/// Activations and per-layer caches of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    stamp: u64,
    input: TensorBuffer,
    output: TensorBuffer,
    layers: Vec<LayerCache>,
}

impl ForwardCache {
    pub fn output(&self) -> &TensorBuffer {
        &self.output
    }
}

/// Parameter gradients, one entry per layer (empty for parameterless ones).
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.flatten().iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

impl AeModel {
    /// Validates the layer chain against `input_shape` and draws Glorot
    /// uniform weights from `seed`; biases start at zero.
    pub fn new(input_shape: Vec<usize>, specs: Vec<LayerSpec>, shortcuts: Vec<(usize, usize)>, seed: u64) -> Result<Self> {
        let mut model = Self::unweighted(input_shape, specs, shortcuts)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut model.layers {
            if !layer.spec.is_conv() {
                continue;
            }
            let taps = layer.weight.ncols() / layer.in_channels;
            let bound = (6.0 / ((layer.in_channels + layer.spec.filters) * taps) as f64).sqrt();
            layer.weight.mapv_inplace(|_| rng.random_range(-bound..=bound));
        }
        Ok(model)
    }

    /// Same validation as [`AeModel::new`] with all parameters zero.
    pub fn unweighted(input_shape: Vec<usize>, specs: Vec<LayerSpec>, shortcuts: Vec<(usize, usize)>) -> Result<Self> {
        TensorBuffer::zeros(input_shape.clone())?;
        let mut shapes = vec![input_shape.clone()];
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let cur = shapes.last().expect("nonempty");
            if spec.kind == LayerKind::Conv2d && cur.len() != 3 {
                return Err(Error::Shape(format!("conv2d on {cur:?}")));
            }
            let next = spec.output_shape(cur)?;
            layers.push(Layer::new(spec, cur[0]));
            shapes.push(next);
        }
        if shapes.last() != Some(&input_shape) {
            return Err(Error::Shape(format!("output shape {:?} differs from input {input_shape:?}", shapes.last())));
        }
        let mut shortcuts = shortcuts;
        shortcuts.sort_unstable();
        shortcuts.dedup();
        for &(src, dst) in &shortcuts {
            if src > dst || dst >= layers.len() {
                return Err(Error::Shape(format!("shortcut {src} -> {dst} does not point forward")));
            }
            if src == dst || shapes[src] != shapes[dst] {
                return Err(Error::Shape(format!(
                    "shortcut {src} -> {dst} joins {:?} and {:?}",
                    shapes[src], shapes[dst]
                )));
            }
        }
        Ok(Self { input_shape, layers, shortcuts, metadata: BTreeMap::new(), stamp: next_stamp() })
    }

    /// conv, relu, pool, conv, relu, pool | upsample, conv, relu, upsample, conv.
    /// Spatial extents must be multiples of 4; the latent is `(filters, D/4)`.
    pub fn standard(input_shape: Vec<usize>, arch: &ArchConfig, seed: u64) -> Result<Self> {
        let conv = |f: usize| match input_shape.len() {
            3 => LayerSpec::conv2d(f, arch.kernel),
            _ => LayerSpec::conv1d(f, arch.kernel),
        };
        let c = *input_shape.first().ok_or_else(|| Error::Shape("empty input shape".into()))?;
        let specs = vec![
            conv(arch.filters),
            LayerSpec::relu(),
            LayerSpec::max_pool(2),
            conv(arch.filters),
            LayerSpec::relu(),
            LayerSpec::max_pool(2),
            LayerSpec::upsample(2),
            conv(arch.filters),
            LayerSpec::relu(),
            LayerSpec::upsample(2),
            conv(c),
        ];
        let shortcuts = match arch.shortcuts {
            ShortcutMode::None => vec![],
            ShortcutMode::Inner => vec![(3, 7)],
            ShortcutMode::Full => vec![(3, 7), (2, 10)],
        };
        Self::new(input_shape, specs, shortcuts, seed)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn shortcuts(&self) -> &[(usize, usize)] {
        &self.shortcuts
    }

    /// Shapes of all activations `a_0 ..= a_n`.
    pub fn activation_shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = vec![self.input_shape.clone()];
        for layer in &self.layers {
            let next = layer.spec.output_shape(shapes.last().expect("nonempty")).expect("validated");
            shapes.push(next);
        }
        shapes
    }

    /// The activation with the smallest spatial extent (first one on ties).
    pub fn latent_shape(&self) -> Vec<usize> {
        let shapes = self.activation_shapes();
        let size = |s: &Vec<usize>| s[1..].iter().product::<usize>();
        let min = shapes.iter().map(size).min().expect("nonempty");
        shapes.into_iter().find(|s| size(s) == min).expect("present")
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    /// All weights then biases, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::Shape(format!("{} parameters for a model with {}", values.len(), self.num_params())));
        }
        let mut at = 0;
        for l in &mut self.layers {
            for w in l.weight.iter_mut().chain(l.bias.iter_mut()) {
                *w = values[at];
                at += 1;
            }
        }
        self.stamp = next_stamp();
        Ok(())
    }

    /// Mutable access to one layer; invalidates outstanding caches.
    pub fn layer_mut(&mut self, k: usize) -> &mut Layer {
        self.stamp = next_stamp();
        &mut self.layers[k]
    }

    fn check_input(&self, x: &TensorBuffer) -> Result<()> {
        if x.shape() != self.input_shape.as_slice() {
            return Err(Error::Shape(format!("input {:?}, model expects {:?}", x.shape(), self.input_shape)));
        }
        Ok(())
    }

    pub fn forward(&self, x: &TensorBuffer) -> Result<TensorBuffer> {
        self.forward_cached(x).map(|c| c.output)
    }

    pub fn forward_cached(&self, x: &TensorBuffer) -> Result<ForwardCache> {
        self.check_input(x)?;
        let mut acts: Vec<TensorBuffer> = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        let mut caches = Vec::with_capacity(self.layers.len());
        for (k, layer) in self.layers.iter().enumerate() {
            let mut input = acts[k].clone();
            for &(src, _) in self.shortcuts.iter().filter(|s| s.1 == k) {
                input.add_assign(&acts[src]);
            }
            let (y, cache) = layer.forward_cached(&input)?;
            acts.push(y);
            caches.push(cache);
        }
        let output = acts.pop().expect("nonempty");
        Ok(ForwardCache { stamp: self.stamp, input: x.clone(), output, layers: caches })
    }

    pub fn loss(&self, x: &TensorBuffer) -> Result<f64> {
        reconstruction_loss(x, &self.forward(x)?)
    }

    /// Exact gradients of the reconstruction loss of `x`, using a cache from
    /// this model's forward pass on `x`.
    pub fn backward(&self, x: &TensorBuffer, cache: &ForwardCache) -> Result<Gradients> {
        if cache.stamp != self.stamp {
            return Err(Error::StaleCache("cache was produced by different model parameters".into()));
        }
        if cache.input != *x {
            return Err(Error::StaleCache("cache was produced for a different input".into()));
        }
        let n = self.layers.len();
        let scale = 2.0 / x.len() as f64;
        let g_out: Vec<f64> = cache.output.data().iter().zip(x.data()).map(|(y, t)| scale * (y - t)).collect();
        let mut pending: Vec<Option<TensorBuffer>> = vec![None; n + 1];
        pending[n] = Some(TensorBuffer::new(self.input_shape.clone(), g_out)?);
        let mut weights: Vec<Array2<f64>> = self.layers.iter().map(|l| Array2::zeros(l.weight.raw_dim())).collect();
        let mut biases: Vec<Array1<f64>> = self.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect();
        for k in (0..n).rev() {
            let g = pending[k + 1].take().expect("every activation feeds the next layer");
            let g_in = self.layers[k].backward(&cache.layers[k], &g, &mut weights[k], &mut biases[k])?;
            for &(src, _) in self.shortcuts.iter().filter(|s| s.1 == k) {
                accumulate(&mut pending[src], &g_in);
            }
            accumulate(&mut pending[k], &g_in);
        }
        Ok(Gradients { weights, biases })
    }

    /// Loss and gradients of one sample.
    pub fn loss_and_gradients(&self, x: &TensorBuffer) -> Result<(f64, Gradients)> {
        let cache = self.forward_cached(x)?;
        let loss = reconstruction_loss(x, &cache.output)?;
        Ok((loss, self.backward(x, &cache)?))
    }
}

fn accumulate(slot: &mut Option<TensorBuffer>, g: &TensorBuffer) {
    match slot {
        Some(acc) => acc.add_assign(g),
        None => *slot = Some(g.clone()),
    }
}
