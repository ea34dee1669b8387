//! Minibatch Adam training with robust loss, input-gradient penalty and
//! weight regularization.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::net::{Activation, Grads, Mlp};
use super::{huber, huber_grad, Sample, SurrogateError, SurrogateNet};
use crate::domain::Bound;
use crate::rng::{derive_seed, rng_from};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Huber,
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PenaltyMode {
    /// Second-order backprop.
    #[default]
    Exact,
    /// Central differences of step `h` on the inputs.
    FiniteDifference { h: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_init: f64,
    pub lr_end: f64,
    pub loss: LossKind,
    pub huber_delta: f64,
    pub lambda_grad: f64,
    pub lambda_l1: f64,
    pub lambda_l2: f64,
    pub penalty: PenaltyMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            activation: Activation::Tanh,
            epochs: 10_000,
            batch_size: 1024,
            lr_init: 0.1,
            lr_end: 5e-4,
            loss: LossKind::Huber,
            huber_delta: 1.0,
            lambda_grad: 5e-2,
            lambda_l1: 5e-4,
            lambda_l2: 5e-4,
            penalty: PenaltyMode::Exact,
        }
    }
}

impl TrainConfig {
    /// Smaller network and schedule that trains in about a minute on 20k samples.
    pub fn desk() -> Self {
        Self {
            hidden: vec![64, 64],
            epochs: 300,
            batch_size: 256,
            lr_init: 1e-2,
            lambda_grad: 1e-3,
            lambda_l1: 1e-6,
            lambda_l2: 1e-6,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<(), SurrogateError> {
        let bad = |m: &str| Err(SurrogateError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        if !(self.lr_init > 0.0 && self.lr_end > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.huber_delta > 0.0) {
            return bad("huber_delta must be positive");
        }
        if !(self.lambda_grad >= 0.0 && self.lambda_l1 >= 0.0 && self.lambda_l2 >= 0.0) {
            return bad("regularization weights must be non-negative");
        }
        if let PenaltyMode::FiniteDifference { h } = self.penalty {
            if !(h > 0.0) {
                return bad("finite-difference step must be positive");
            }
        }
        Ok(())
    }

    /// Cosine annealing from `lr_init` at epoch 0 to `lr_end` at the last epoch.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.lr_init;
        }
        let t = epoch as f64 / (self.epochs - 1) as f64;
        self.lr_end + 0.5 * (self.lr_init - self.lr_end) * (1.0 + (std::f64::consts::PI * t).cos())
    }
}

struct Adam {
    m: Grads,
    v: Grads,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(net: &Mlp) -> Self {
        Self {
            m: Grads::zeros_like(net),
            v: Grads::zeros_like(net),
            t: 0,
        }
    }

    fn step(&mut self, net: &mut Mlp, g: &Grads, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let upd = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        };
        for k in 0..net.weights.len() {
            ndarray::Zip::from(&mut net.weights[k])
                .and(&mut self.m.w[k])
                .and(&mut self.v.w[k])
                .and(&g.w[k])
                .for_each(|p, m, v, &g| upd(p, m, v, g));
            ndarray::Zip::from(&mut net.biases[k])
                .and(&mut self.m.b[k])
                .and(&mut self.v.b[k])
                .and(&g.b[k])
                .for_each(|p, m, v, &g| upd(p, m, v, g));
        }
    }
}

fn weight_penalty(net: &Mlp, l1: f64, l2: f64) -> f64 {
    net.weights.iter().flat_map(|w| w.iter()).map(|w| l1 * w.abs() + l2 * w * w).sum()
}

/// Fit a surrogate to `samples` (inputs already normalized by `input_bounds`).
pub fn train(samples: &[Sample], input_bounds: &[Bound], cfg: &TrainConfig, seed: u64) -> Result<SurrogateNet, SurrogateError> {
    cfg.check()?;
    if samples.is_empty() {
        return Err(SurrogateError::EmptyDataset);
    }
    let d = input_bounds.len();
    if let Some(bad) = samples.iter().position(|s| s.x.len() != d) {
        return Err(SurrogateError::DimensionMismatch {
            expected: d,
            got: samples[bad].x.len(),
        });
    }
    if let Some(bad) = samples.iter().position(|s| !s.y.is_finite() || s.x.iter().any(|v| !v.is_finite())) {
        return Err(SurrogateError::NonFiniteSample(bad));
    }
    let n = samples.len();
    let y_mean = samples.iter().map(|s| s.y).sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s.y - y_mean).powi(2)).sum::<f64>() / n as f64;
    let y_std = if var > 0.0 { var.sqrt() } else { 1.0 };
    let x = Array2::from_shape_fn((n, d), |(i, j)| samples[i].x[j]);
    let y = Array1::from_iter(samples.iter().map(|s| (s.y - y_mean) / y_std));

    let mut sizes = vec![d];
    sizes.extend(&cfg.hidden);
    sizes.push(1);
    let mut rng = rng_from(derive_seed(seed, &[0]));
    let mut mlp = Mlp::glorot(&sizes, cfg.activation, &mut rng);
    let mut adam = Adam::new(&mlp);
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = rng_from(derive_seed(seed, &[1]));
    let mut loss_curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let lr = cfg.learning_rate(epoch);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), chunk);
            let yb = y.select(Axis(0), chunk);
            let bsz = chunk.len() as f64;
            let mut data_loss = 0.0;
            let ybar_of = |pred: &Array1<f64>| {
                let mut out = Array1::zeros(pred.len());
                for i in 0..pred.len() {
                    let r = pred[i] - yb[i];
                    out[i] = match cfg.loss {
                        LossKind::Huber => huber_grad(r, cfg.huber_delta),
                        LossKind::Squared => r,
                    } / bsz;
                }
                out
            };
            let mut g = Grads::zeros_like(&mlp);
            let (pred, penalty) = match cfg.penalty {
                PenaltyMode::Exact => mlp.grads_exact(xb.view(), ybar_of, cfg.lambda_grad, &mut g),
                PenaltyMode::FiniteDifference { h } => mlp.grads_fd(xb.view(), ybar_of, cfg.lambda_grad, h, &mut g),
            };
            for i in 0..pred.len() {
                let r = pred[i] - yb[i];
                data_loss += match cfg.loss {
                    LossKind::Huber => huber(r, cfg.huber_delta),
                    LossKind::Squared => 0.5 * r * r,
                };
            }
            let reg = weight_penalty(&mlp, cfg.lambda_l1, cfg.lambda_l2);
            for (gw, w) in g.w.iter_mut().zip(&mlp.weights) {
                ndarray::Zip::from(gw)
                    .and(w)
                    .for_each(|g, &w| {
                        let sign = if w != 0.0 { w.signum() } else { 0.0 };
                        *g += cfg.lambda_l1 * sign + 2.0 * cfg.lambda_l2 * w
                    });
            }
            let batch_loss = data_loss / bsz + penalty + reg;
            if !batch_loss.is_finite() {
                return Err(SurrogateError::NonFiniteLoss { epoch });
            }
            epoch_loss += batch_loss * bsz;
            adam.step(&mut mlp, &g, lr);
        }
        loss_curve.push(epoch_loss / n as f64);
    }

    Ok(SurrogateNet {
        mlp,
        input_bounds: input_bounds.to_vec(),
        y_mean,
        y_std,
        config: cfg.clone(),
        seed,
        loss_curve,
    })
}
