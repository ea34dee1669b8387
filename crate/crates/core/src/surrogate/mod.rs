//! Neural surrogate of the cost-of-transport landscape.
//!
//! Inputs are `(step_length, step_frequency, kappa, delta_t, severity)`
//! min-max normalized to the unit cube; the output is CoT in J/m. Training
//! happens on a standardized target, and the gradient penalty is applied to
//! that standardized output.

pub mod net;
pub mod sampling;
pub mod train;

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    Bound, ExoControlParams, GaitParams, DELAY_BOUNDS, GAIN_BOUNDS, SEVERITY_BOUNDS, STEP_FREQUENCY_BOUNDS,
    STEP_LENGTH_BOUNDS,
};
pub use net::{Activation, Mlp};
pub use sampling::{bin_index, lhs_sample, linspace, uniform_grid};
pub use train::{train, LossKind, PenaltyMode, TrainConfig};

/// Physical ranges of the five surrogate inputs, in input order.
pub const INPUT_BOUNDS: [Bound; 5] = [STEP_LENGTH_BOUNDS, STEP_FREQUENCY_BOUNDS, GAIN_BOUNDS, DELAY_BOUNDS, SEVERITY_BOUNDS];

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("input has {got} components, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sample {0} has a non-finite value")]
    NonFiniteSample(usize),
    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One training example with a normalized input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Sample {
    pub fn from_physical(x: &[f64], bounds: &[Bound], y: f64) -> Self {
        Self {
            x: normalize(x, bounds),
            y,
        }
    }
}

pub fn normalize(x: &[f64], bounds: &[Bound]) -> Vec<f64> {
    x.iter().zip(bounds).map(|(v, b)| b.normalize(*v)).collect()
}

pub fn denormalize(u: &[f64], bounds: &[Bound]) -> Vec<f64> {
    u.iter().zip(bounds).map(|(v, b)| b.denormalize(*v)).collect()
}

/// Physical surrogate input vector for a gait, control setting and severity.
pub fn input_vector(g: &GaitParams, c: &ExoControlParams, severity: f64) -> [f64; 5] {
    [g.step_length, g.step_frequency, c.gain_kappa, c.delay_dt, severity]
}

pub fn huber(r: f64, delta: f64) -> f64 {
    if r.abs() <= delta {
        0.5 * r * r
    } else {
        delta * (r.abs() - 0.5 * delta)
    }
}

pub fn huber_grad(r: f64, delta: f64) -> f64 {
    r.clamp(-delta, delta)
}

/// Trained network plus the normalization needed to use it on physical values.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateNet {
    pub mlp: Mlp,
    pub input_bounds: Vec<Bound>,
    pub y_mean: f64,
    pub y_std: f64,
    pub config: TrainConfig,
    pub seed: u64,
    /// Mean total training loss per epoch.
    pub loss_curve: Vec<f64>,
}

impl SurrogateNet {
    pub fn input_dim(&self) -> usize {
        self.input_bounds.len()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.loss_curve.last().copied()
    }

    /// Predicted CoT at a normalized input.
    pub fn forward(&self, x: &[f64]) -> f64 {
        self.y_mean + self.y_std * self.mlp.forward(x)
    }

    /// Batched [`SurrogateNet::forward`] over rows of normalized inputs.
    pub fn forward_rows(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        if rows.is_empty() {
            return vec![];
        }
        let x = Array2::from_shape_fn((rows.len(), self.input_dim()), |(i, j)| rows[i][j]);
        self.mlp.forward_batch(x.view()).iter().map(|v| self.y_mean + self.y_std * v).collect()
    }

    /// Gradient of predicted CoT (J/m) with respect to the normalized input.
    pub fn input_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.mlp.input_gradient(x).into_iter().map(|g| g * self.y_std).collect()
    }

    /// Gradient of the standardized output, the quantity the penalty acts on.
    pub fn standardized_input_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.mlp.input_gradient(x)
    }

    pub fn predict(&self, x_physical: &[f64]) -> f64 {
        self.forward(&normalize(x_physical, &self.input_bounds))
    }

    pub fn predict_cot(&self, g: &GaitParams, c: &ExoControlParams, severity: f64) -> f64 {
        self.predict(&input_vector(g, c, severity))
    }

    /// Mean Euclidean norm of the standardized input gradient over normalized points.
    pub fn mean_gradient_norm(&self, points: &[Vec<f64>]) -> f64 {
        let total: f64 = points
            .iter()
            .map(|p| self.standardized_input_gradient(p).iter().map(|g| g * g).sum::<f64>().sqrt())
            .sum();
        total / points.len() as f64
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            layer_sizes: self.mlp.sizes.clone(),
            activation: self.mlp.activation,
            weights: self.mlp.weights.iter().map(|w| w.iter().copied().collect()).collect(),
            biases: self.mlp.biases.iter().map(|b| b.to_vec()).collect(),
            input_bounds: self.input_bounds.clone(),
            y_mean: self.y_mean,
            y_std: self.y_std,
            config: self.config.clone(),
            seed: self.seed,
            loss_curve: self.loss_curve.clone(),
        }
    }

    pub fn from_checkpoint(c: Checkpoint) -> Result<Self, SurrogateError> {
        let sizes = &c.layer_sizes;
        if sizes.len() < 2 || *sizes.last().unwrap() != 1 {
            return Err(SurrogateError::Checkpoint("layer sizes must have at least two entries and end in 1".into()));
        }
        if sizes[0] != c.input_bounds.len() {
            return Err(SurrogateError::Checkpoint("input bounds do not match the input layer".into()));
        }
        let layers = sizes.len() - 1;
        if c.weights.len() != layers || c.biases.len() != layers {
            return Err(SurrogateError::Checkpoint(format!("expected {layers} weight and bias arrays")));
        }
        let mut mlp = Mlp::zeros(sizes, c.activation);
        for k in 0..layers {
            let shape = (sizes[k], sizes[k + 1]);
            mlp.weights[k] = Array2::from_shape_vec(shape, c.weights[k].clone())
                .map_err(|_| SurrogateError::Checkpoint(format!("weight array {k} has wrong length")))?;
            if c.biases[k].len() != sizes[k + 1] {
                return Err(SurrogateError::Checkpoint(format!("bias array {k} has wrong length")));
            }
            mlp.biases[k] = c.biases[k].clone().into();
        }
        Ok(Self {
            mlp,
            input_bounds: c.input_bounds,
            y_mean: c.y_mean,
            y_std: c.y_std,
            config: c.config,
            seed: c.seed,
            loss_curve: c.loss_curve,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_checkpoint()).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, SurrogateError> {
        let c: Checkpoint = serde_json::from_str(s).map_err(|e| SurrogateError::Checkpoint(e.to_string()))?;
        Self::from_checkpoint(c)
    }

    pub fn save(&self, path: &Path) -> Result<(), SurrogateError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SurrogateError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Serialized form: row-major weights of shape `(layer_sizes[k], layer_sizes[k + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub input_bounds: Vec<Bound>,
    pub y_mean: f64,
    pub y_std: f64,
    pub config: TrainConfig,
    pub seed: u64,
    pub loss_curve: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng;

    #[test]
    fn huber_branches() {
        assert_eq!(huber(0.5, 1.0), 0.125);
        assert_eq!(huber(2.0, 1.0), 1.5);
        assert_eq!(huber(-2.0, 1.0), 1.5);
        let d = 0.7;
        assert!((huber(d, d) - d * d / 2.0).abs() < 1e-15);
        assert!((d * (d - d / 2.0) - d * d / 2.0).abs() < 1e-15);
    }

    fn small_cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            hidden: vec![16, 16],
            epochs,
            batch_size: 128,
            lr_init: 1e-2,
            lambda_grad: 0.0,
            lambda_l1: 0.0,
            lambda_l2: 0.0,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn learns_first_coordinate() {
        let b = [Bound::new(0.0, 1.0), Bound::new(0.0, 1.0)];
        let pts = lhs_sample(&b, 1000, 1);
        let data: Vec<Sample> = pts.iter().map(|p| Sample { x: p.clone(), y: p[0] }).collect();
        let net = train(&data, &b, &small_cfg(300), 2).unwrap();
        let worst = uniform_grid(&b, &[21, 21])
            .iter()
            .map(|p| (net.forward(p) - p[0]).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.02, "max error {worst}");
    }

    #[test]
    fn training_is_deterministic_and_checkpoint_round_trips() {
        let b = [Bound::new(0.0, 1.0), Bound::new(-1.0, 1.0)];
        let mut rng = rng_from(4);
        let data: Vec<Sample> = (0..200)
            .map(|_| {
                let x = vec![rng.random::<f64>(), rng.random::<f64>()];
                let y = 3.0 + x[0] * x[1];
                Sample { x, y }
            })
            .collect();
        let mut cfg = small_cfg(5);
        cfg.lambda_grad = 5e-2;
        let a = train(&data, &b, &cfg, 9).unwrap();
        let c = train(&data, &b, &cfg, 9).unwrap();
        assert_eq!(a, c);
        let back = SurrogateNet::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.to_json(), a.to_json());
    }

    #[test]
    fn rejects_bad_inputs() {
        let b = [Bound::new(0.0, 1.0)];
        assert!(matches!(train(&[], &b, &small_cfg(1), 0), Err(SurrogateError::EmptyDataset)));
        let bad = [Sample { x: vec![0.1, 0.2], y: 1.0 }];
        assert!(matches!(train(&bad, &b, &small_cfg(1), 0), Err(SurrogateError::DimensionMismatch { .. })));
        let nan = [Sample { x: vec![0.1], y: f64::NAN }];
        assert!(matches!(train(&nan, &b, &small_cfg(1), 0), Err(SurrogateError::NonFiniteSample(0))));
        let mut cfg = small_cfg(1);
        cfg.epochs = 0;
        assert!(matches!(train(&[Sample { x: vec![0.1], y: 1.0 }], &b, &cfg, 0), Err(SurrogateError::InvalidConfig(_))));
    }

    #[test]
    fn cosine_schedule_endpoints() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.learning_rate(0), 0.1);
        assert!((cfg.learning_rate(cfg.epochs - 1) - 5e-4).abs() < 1e-15);
        assert!(cfg.learning_rate(5000) < 0.1 && cfg.learning_rate(5000) > 5e-4);
    }
}
