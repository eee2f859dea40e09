//! Minibatch gradient descent with classical momentum and input-noise augmentation.

use ndarray::{s, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::grad::{loss_and_gradient, mse_loss};
use super::model::{LifterInput, LifterModel};
use crate::error::{Error, Result};
use crate::geometry::{normalize_pose, Pose2D, Pose3D};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LifterTrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// Standard deviation of the Gaussian noise added to `x̃` each time a sample is drawn.
    pub noise_std: f64,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
    pub input: LifterInput,
    /// Halve the learning rate whenever an epoch's mean loss exceeds the previous one.
    pub halve_on_increase: bool,
    pub seed: u64,
}

impl Default for LifterTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            momentum: 0.9,
            epochs: 200,
            noise_std: 0.1,
            batch_size: 64,
            hidden: vec![256, 256],
            input: LifterInput::Full,
            halve_on_increase: false,
            seed: 0,
        }
    }
}

impl LifterTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!(
                "noise std must be non-negative, got {}",
                self.noise_std
            ));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean minibatch loss per epoch (noisy inputs, standardized targets).
    pub epoch_losses: Vec<f64>,
    /// Noise-free loss over the whole training set, standardized targets.
    pub final_loss: f64,
    /// Root-mean-square of centered targets (mm); standardized losses are relative to its square.
    pub target_scale: f64,
    pub final_learning_rate: f64,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct TrainedLifter {
    pub model: LifterModel,
    pub report: TrainReport,
}

/// Affine standardization folded into the first and last layers after training.
struct Standardizer {
    input_mean: Array1<f64>,
    input_std: Array1<f64>,
    target_mean: Array1<f64>,
    target_scale: f64,
}

impl Standardizer {
    fn fit(inputs: &Array2<f64>, targets: &Array2<f64>) -> Self {
        let input_mean = inputs.mean_axis(Axis(0)).unwrap();
        let input_std = inputs
            .std_axis(Axis(0), 0.0)
            .mapv(|s| if s > 1e-12 { s } else { 1.0 });
        let target_mean = targets.mean_axis(Axis(0)).unwrap();
        let spread = (targets - &target_mean.view().insert_axis(Axis(0)))
            .mapv(|v| v * v)
            .mean()
            .unwrap()
            .sqrt();
        Self {
            input_mean,
            input_std,
            target_mean,
            target_scale: if spread > 1e-12 { spread } else { 1.0 },
        }
    }

    fn inputs(&self, raw: &Array2<f64>) -> Array2<f64> {
        (raw - &self.input_mean.view().insert_axis(Axis(0)))
            / &self.input_std.view().insert_axis(Axis(0))
    }

    fn targets(&self, raw: &Array2<f64>) -> Array2<f64> {
        (raw - &self.target_mean.view().insert_axis(Axis(0))) / self.target_scale
    }

    /// Rewrites a model trained on standardized data so it accepts raw inputs
    /// and emits millimeters.
    fn fold(&self, model: &mut LifterModel) {
        let first = &mut model.layers[0];
        for (mut col, s) in first.weights.columns_mut().into_iter().zip(&self.input_std) {
            col /= *s;
        }
        first.bias = &first.bias - &first.weights.dot(&self.input_mean);
        let last = model.layers.last_mut().unwrap();
        last.weights *= self.target_scale;
        last.bias = &last.bias * self.target_scale + &self.target_mean;
    }
}

fn init_layers(model: &mut LifterModel, rng: &mut ChaCha8Rng) {
    for layer in &mut model.layers {
        let limit = (6.0 / (layer.inputs() + layer.outputs()) as f64).sqrt();
        layer
            .weights
            .mapv_inplace(|_| rng.random_range(-limit..limit));
        layer.bias.fill(0.0);
    }
}

/// Trains a lifter on `(2D pose in pixels, 3D pose in mm)` pairs.
///
/// 3D targets are centered per pose; the mean of the removed centroids becomes
/// the model's `mean_offset`. Identical inputs and seed give an identical model.
pub fn train_lifter(
    pairs: &[(Pose2D, Pose3D)],
    config: &LifterTrainConfig,
) -> Result<TrainedLifter> {
    config.validate()?;
    let Some((first, _)) = pairs.first() else {
        return Err(Error::EmptyDataset);
    };
    let m = first.len();
    let input_dim = config.input.dim(m);
    let n = pairs.len();

    let mut raw_inputs = Array2::zeros((n, input_dim));
    let mut raw_targets = Array2::zeros((n, 3 * m));
    let mut offset_sum = nalgebra::Vector3::zeros();
    for (i, (p2, p3)) in pairs.iter().enumerate() {
        if p2.len() != m || p3.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: if p2.len() != m { p2.len() } else { p3.len() },
            });
        }
        let normalized = normalize_pose(p2)?;
        config
            .input
            .encode(&normalized, raw_inputs.row_mut(i).as_slice_mut().unwrap());
        let centroid = p3.centroid();
        offset_sum += centroid;
        for (j, p) in p3.joints.iter().enumerate() {
            let c = p - centroid;
            raw_targets[[i, 3 * j]] = c.x;
            raw_targets[[i, 3 * j + 1]] = c.y;
            raw_targets[[i, 3 * j + 2]] = c.z;
        }
    }

    let scaler = Standardizer::fit(&raw_inputs, &raw_targets);
    let targets = scaler.targets(&raw_targets);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = LifterModel::zeros(m, config.input, &config.hidden);
    init_layers(&mut model, &mut rng);
    let mut velocity_w: Vec<Array2<f64>> = model
        .layers
        .iter()
        .map(|l| Array2::zeros(l.weights.raw_dim()))
        .collect();
    let mut velocity_b: Vec<Array1<f64>> = model
        .layers
        .iter()
        .map(|l| Array1::zeros(l.bias.raw_dim()))
        .collect();

    let noise =
        Normal::new(0.0, config.noise_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let noisy_dims = 2 * m;
    let mut order: Vec<usize> = (0..n).collect();
    let mut lr = config.learning_rate;
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut batch_in = Array2::zeros((chunk.len(), input_dim));
            let mut batch_t = Array2::zeros((chunk.len(), 3 * m));
            for (r, &idx) in chunk.iter().enumerate() {
                batch_in.row_mut(r).assign(&raw_inputs.row(idx));
                batch_t.row_mut(r).assign(&targets.row(idx));
            }
            if config.noise_std > 0.0 {
                batch_in
                    .slice_mut(s![.., ..noisy_dims])
                    .mapv_inplace(|v| v + noise.sample(&mut rng));
            }
            let batch_in = scaler.inputs(&batch_in);
            let (loss, grad) = loss_and_gradient(&model, batch_in.view(), batch_t.view());
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    step,
                    learning_rate: lr,
                });
            }
            epoch_loss += loss * chunk.len() as f64;
            for (i, layer) in model.layers.iter_mut().enumerate() {
                velocity_w[i]
                    .zip_mut_with(&grad.weights[i], |v, g| *v = config.momentum * *v - lr * g);
                velocity_b[i]
                    .zip_mut_with(&grad.biases[i], |v, g| *v = config.momentum * *v - lr * g);
                layer.weights += &velocity_w[i];
                layer.bias += &velocity_b[i];
            }
        }
        let epoch_loss = epoch_loss / n as f64;
        if config.halve_on_increase && epoch_losses.last().is_some_and(|&prev| epoch_loss > prev) {
            lr *= 0.5;
        }
        epoch_losses.push(epoch_loss);
    }

    let final_loss = mse_loss(&model, scaler.inputs(&raw_inputs).view(), targets.view());
    if !final_loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: config.epochs,
            step: 0,
            learning_rate: lr,
        });
    }
    scaler.fold(&mut model);
    model.mean_offset = offset_sum / n as f64;
    model.validate()?;
    Ok(TrainedLifter {
        model,
        report: TrainReport {
            epoch_losses,
            final_loss,
            target_scale: scaler.target_scale,
            final_learning_rate: lr,
            samples: n,
        },
    })
}
