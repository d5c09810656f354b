use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::AeModel;
use super::tensor::TensorBuffer;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 200, batch_size: 16, learning_rate: 1e-3, seed: 0, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epochs > 0
            && self.batch_size > 0
            && self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training hyperparameters {self:?}")))
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the lowest loss.
    pub model: AeModel,
    /// Mean loss over the dataset: entry 0 before any update, entry `e`
    /// after epoch `e`.
    pub loss_curve: Vec<f64>,
    /// Epoch whose parameters were kept (0 means the initial model).
    pub best_epoch: usize,
    /// Set when the loss exceeded ten times its initial value; training
    /// stopped at that epoch.
    pub diverged: bool,
}

impl TrainOutcome {
    pub fn best_loss(&self) -> f64 {
        self.loss_curve[self.best_epoch]
    }
}

/// Mean reconstruction loss over a dataset.
pub fn mean_loss(model: &AeModel, data: &[TensorBuffer]) -> Result<f64> {
    let mut sum = 0.0;
    for x in data {
        sum += model.loss(x)?;
    }
    Ok(sum / data.len() as f64)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            params[i] -= cfg.learning_rate * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + cfg.epsilon);
        }
    }
}

/// Mini-batch Adam on the mean reconstruction loss. The dataset is put in a
/// canonical order first, so the result depends on the seed and not on the
/// order samples were passed in.
pub fn train(model: &AeModel, dataset: &[TensorBuffer], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Domain("empty training set".into()));
    }
    let mut data: Vec<&TensorBuffer> = dataset.iter().collect();
    for x in &data {
        if x.shape() != model.input_shape() {
            return Err(Error::Shape(format!("sample {:?}, model expects {:?}", x.shape(), model.input_shape())));
        }
        if x.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("training sample contains non-finite values".into()));
        }
    }
    data.sort_by(|a, b| {
        a.data().iter().zip(b.data()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let owned: Vec<TensorBuffer> = data.iter().map(|x| (*x).clone()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = model.clone();
    let mut params = current.params();
    let mut adam = Adam { m: vec![0.0; params.len()], v: vec![0.0; params.len()], t: 0 };
    let initial = mean_loss(&current, &owned)?;
    let mut loss_curve = vec![initial];
    let mut best = (0, initial, current.clone());
    let mut diverged = false;
    let mut order: Vec<usize> = (0..owned.len()).collect();
    let mut grad = vec![0.0; params.len()];

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let (_, g) = current.loss_and_gradients(&owned[i])?;
                for (acc, v) in grad.iter_mut().zip(g.flatten()) {
                    *acc += v;
                }
            }
            let inv = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            adam.step(&mut params, &grad, cfg);
            current.set_params(&params)?;
        }
        let loss = mean_loss(&current, &owned)?;
        loss_curve.push(loss);
        if !loss.is_finite() || loss > 10.0 * initial {
            diverged = true;
            break;
        }
        if loss < best.1 {
            best = (epoch, loss, current.clone());
        }
    }
    let (best_epoch, _, model) = best;
    Ok(TrainOutcome { model, loss_curve, best_epoch, diverged })
}
