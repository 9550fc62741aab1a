//! Backpropagation of the reconstruction loss and mini-batch Adam training.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{mse_loss, Activation, AutoencoderModel, LayerWeights};
use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |field, reason: &str| {
            Err(Error::InvalidSpec {
                field,
                reason: reason.to_string(),
            })
        };
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return invalid("learning_rate", "must be positive and finite");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) {
            return invalid("beta1", "must lie in (0, 1)");
        }
        if !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return invalid("beta2", "must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return invalid("epsilon", "must be positive");
        }
        if self.batch_size == 0 {
            return invalid("batch_size", "must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Mean per-element squared error of each epoch, weighted by batch size.
    pub epoch_losses: Vec<f64>,
    pub epochs_run: usize,
    pub samples_seen: usize,
}

/// Loss of `model` reconstructing `target` from `batch` and the gradient of
/// that loss with respect to every parameter, laid out like the model's layers.
pub fn loss_and_gradients(
    model: &AutoencoderModel,
    batch: &Matrix,
    target: &Matrix,
) -> Result<(f64, Vec<LayerWeights>)> {
    let outputs = model.forward_trace(batch)?;
    let output = outputs.last().expect("model has layers");
    let loss = mse_loss(target, output)?;

    let scale = 2.0 / output.len() as f64;
    let n_layers = model.layers().len();
    let mut grads = Vec::with_capacity(n_layers);
    // dL/dz for the output layer; identity output has unit derivative.
    let mut delta: Matrix = (output - target) * scale;
    if model.activation_for(n_layers - 1) == Activation::Relu {
        relu_mask(&mut delta, output);
    }
    for i in (0..n_layers).rev() {
        let input = if i == 0 { batch } else { &outputs[i - 1] };
        let weight_grad = input.t().dot(&delta);
        let bias_grad = delta.sum_axis(Axis(0));
        if i > 0 {
            let mut next = delta.dot(&model.layers()[i].weight.t());
            if model.activation_for(i - 1) == Activation::Relu {
                relu_mask(&mut next, &outputs[i - 1]);
            }
            delta = next;
        }
        grads.push(LayerWeights {
            weight: weight_grad,
            bias: bias_grad,
        });
    }
    grads.reverse();
    Ok((loss, grads))
}

fn relu_mask(delta: &mut Matrix, activation: &Matrix) {
    delta.zip_mut_with(activation, |d, &a| {
        if a <= 0.0 {
            *d = 0.0;
        }
    });
}

/// Adam moment estimates for a layer list.
#[derive(Debug, Clone)]
pub struct Adam {
    config: OptimizerConfig,
    first: Vec<LayerWeights>,
    second: Vec<LayerWeights>,
    steps: i32,
}

impl Adam {
    pub fn new(config: OptimizerConfig, layers: &[LayerWeights]) -> Self {
        let zeros = || {
            layers
                .iter()
                .map(|l| LayerWeights::zeros(l.fan_in(), l.fan_out()))
                .collect::<Vec<_>>()
        };
        Self {
            config,
            first: zeros(),
            second: zeros(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.steps
    }

    pub fn step(&mut self, params: &mut [LayerWeights], grads: &[LayerWeights]) {
        self.steps += 1;
        let OptimizerConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            ..
        } = self.config;
        let correct1 = 1.0 - beta1.powi(self.steps);
        let correct2 = 1.0 - beta2.powi(self.steps);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / correct1;
            let v_hat = *v / correct2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        };
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            ndarray::Zip::from(&mut p.weight)
                .and(&g.weight)
                .and(&mut m.weight)
                .and(&mut v.weight)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut p.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

/// Self-reconstruction training with shuffled mini-batches. Adam moments
/// start from zero on every call.
pub fn train(
    model: &mut AutoencoderModel,
    data: &Matrix,
    epochs: usize,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<TrainingReport> {
    opt.validate()?;
    if epochs == 0 {
        return Err(Error::InvalidSpec {
            field: "epochs",
            reason: "must be at least 1".into(),
        });
    }
    if data.ncols() != model.input_dim() {
        return Err(Error::shape(
            "training data columns",
            model.input_dim(),
            data.ncols(),
        ));
    }
    if data.nrows() == 0 {
        return Err(Error::Empty("training data"));
    }

    let mut rng = rng_from(seed);
    let mut adam = Adam::new(*opt, model.layers());
    let mut order: Vec<usize> = (0..data.nrows()).collect();
    let mut epoch_losses = Vec::with_capacity(epochs);
    let mut samples_seen = 0;

    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for (batch_index, chunk) in order.chunks(opt.batch_size).enumerate() {
            let batch: Array2<f64> = data.select(Axis(0), chunk);
            let (loss, grads) = loss_and_gradients(model, &batch, &batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                });
            }
            adam.step(model.layers_mut(), &grads);
            weighted += loss * chunk.len() as f64;
            samples_seen += chunk.len();
        }
        epoch_losses.push(weighted / data.nrows() as f64);
    }
    if !model.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: epochs - 1,
            batch: data.nrows().div_ceil(opt.batch_size) - 1,
        });
    }

    Ok(TrainingReport {
        epoch_losses,
        epochs_run: epochs,
        samples_seen,
    })
}
