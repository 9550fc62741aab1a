//! Mirrored dense autoencoder: construction, forward/encode passes and
//! layer-level weight exchange.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::Matrix;

/// Hidden widths of the reference encoder (the decoder mirrors them).
pub const DEFAULT_ENCODER_HIDDEN: [usize; 4] = [105, 90, 75, 60];
pub const DEFAULT_BOTTLENECK: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, z: &mut Matrix) {
        if self == Activation::Relu {
            z.mapv_inplace(|v| v.max(0.0));
        }
    }
}

/// Parameters of one dense layer. `weight` is `fan_in × fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub weight: Matrix,
    pub bias: Array1<f64>,
}

impl LayerWeights {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.ncols()
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.weight.dim()
    }

    pub fn is_finite(&self) -> bool {
        self.weight
            .iter()
            .chain(self.bias.iter())
            .all(|v| v.is_finite())
    }

    /// Exact equality of shapes and of every entry's bit pattern.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.shape() == other.shape()
            && self.bias.len() == other.bias.len()
            && self
                .weight
                .iter()
                .chain(self.bias.iter())
                .zip(other.weight.iter().chain(other.bias.iter()))
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Checks the internal weight/bias consistency.
    pub fn validate(&self, index: usize) -> Result<()> {
        if self.bias.len() != self.fan_out() {
            return Err(Error::LayerMismatch {
                index,
                reason: format!(
                    "bias length {} does not match fan_out {}",
                    self.bias.len(),
                    self.fan_out()
                ),
            });
        }
        Ok(())
    }
}

/// Architecture descriptor. The decoder mirrors `encoder_hidden`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutoencoderSpec {
    pub input_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub bottleneck_dim: usize,
    #[serde(default)]
    pub hidden_activation: Activation,
    #[serde(default = "identity")]
    pub output_activation: Activation,
}

fn identity() -> Activation {
    Activation::Identity
}

impl AutoencoderSpec {
    pub fn new(input_dim: usize, encoder_hidden: Vec<usize>, bottleneck_dim: usize) -> Self {
        Self {
            input_dim,
            encoder_hidden,
            bottleneck_dim,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
        }
    }

    /// The 105-90-75-60-10 chain with the given input width.
    pub fn default_chain(input_dim: usize) -> Self {
        Self::new(
            input_dim,
            DEFAULT_ENCODER_HIDDEN.to_vec(),
            DEFAULT_BOTTLENECK,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidSpec {
                field: "input_dim",
                reason: "must be at least 1".into(),
            });
        }
        if self.bottleneck_dim == 0 {
            return Err(Error::InvalidSpec {
                field: "bottleneck_dim",
                reason: "must be at least 1".into(),
            });
        }
        if self.encoder_hidden.is_empty() {
            return Err(Error::InvalidSpec {
                field: "encoder_hidden",
                reason: "must contain at least one layer".into(),
            });
        }
        if let Some(pos) = self.encoder_hidden.iter().position(|&w| w == 0) {
            return Err(Error::InvalidSpec {
                field: "encoder_hidden",
                reason: format!("width at position {pos} is zero"),
            });
        }
        Ok(())
    }

    /// Full width chain, input through bottleneck and back out.
    pub fn widths(&self) -> Vec<usize> {
        let mut widths = Vec::with_capacity(2 * self.encoder_hidden.len() + 3);
        widths.push(self.input_dim);
        widths.extend_from_slice(&self.encoder_hidden);
        widths.push(self.bottleneck_dim);
        widths.extend(self.encoder_hidden.iter().rev());
        widths.push(self.input_dim);
        widths
    }

    pub fn layer_count(&self) -> usize {
        2 * self.encoder_hidden.len() + 2
    }

    /// Index of the layer whose activation is the latent code.
    pub fn bottleneck_index(&self) -> usize {
        self.encoder_hidden.len()
    }

    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    spec: AutoencoderSpec,
    layers: Vec<LayerWeights>,
}

impl AutoencoderModel {
    /// Builds the mirrored network with Glorot-uniform weights and zero biases.
    pub fn build(spec: AutoencoderSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng_from(seed);
        let layers = spec
            .widths()
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                LayerWeights {
                    weight: Array2::from_shape_simple_fn((fan_in, fan_out), || {
                        rng.random_range(-limit..=limit)
                    }),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self { spec, layers })
    }

    /// Reassembles a model from a layer list, inferring the architecture.
    pub fn from_layers(layers: Vec<LayerWeights>) -> Result<Self> {
        if layers.len() < 4 || !layers.len().is_multiple_of(2) {
            return Err(Error::InvalidSpec {
                field: "layers",
                reason: format!(
                    "a mirrored autoencoder needs an even layer count >= 4, got {}",
                    layers.len()
                ),
            });
        }
        for (i, layer) in layers.iter().enumerate() {
            layer.validate(i)?;
            if i > 0 && layers[i - 1].fan_out() != layer.fan_in() {
                return Err(Error::LayerMismatch {
                    index: i,
                    reason: format!(
                        "fan_in {} does not chain from previous fan_out {}",
                        layer.fan_in(),
                        layers[i - 1].fan_out()
                    ),
                });
            }
        }
        let depth = layers.len() / 2 - 1;
        let spec = AutoencoderSpec::new(
            layers[0].fan_in(),
            layers[..depth].iter().map(LayerWeights::fan_out).collect(),
            layers[depth].fan_out(),
        );
        spec.validate()?;
        if spec.widths() != chain_widths(&layers) {
            return Err(Error::InvalidSpec {
                field: "layers",
                reason: "width chain is not mirrored around the bottleneck".into(),
            });
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &AutoencoderSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[LayerWeights] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [LayerWeights] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn bottleneck_index(&self) -> usize {
        self.spec.bottleneck_index()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerWeights::param_count).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(LayerWeights::is_finite)
    }

    fn check_batch(&self, batch: &Matrix) -> Result<()> {
        if batch.ncols() != self.spec.input_dim {
            return Err(Error::shape(
                "batch columns",
                self.spec.input_dim,
                batch.ncols(),
            ));
        }
        Ok(())
    }

    pub(crate) fn activation_for(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.spec.output_activation
        } else {
            self.spec.hidden_activation
        }
    }

    pub(crate) fn layer_forward(&self, index: usize, input: &Matrix) -> Matrix {
        let layer = &self.layers[index];
        let mut z = input.dot(&layer.weight) + &layer.bias;
        self.activation_for(index).apply(&mut z);
        z
    }

    /// Every layer's activation output, in order; the last entry is the reconstruction.
    pub fn forward_trace(&self, batch: &Matrix) -> Result<Vec<Matrix>> {
        self.check_batch(batch)?;
        let mut outputs: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for i in 0..self.layers.len() {
            let next = self.layer_forward(i, outputs.last().unwrap_or(batch));
            outputs.push(next);
        }
        Ok(outputs)
    }

    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_batch(batch)?;
        let mut current = batch.to_owned();
        for i in 0..self.layers.len() {
            current = self.layer_forward(i, &current);
        }
        Ok(current)
    }

    /// Latent code: the bottleneck layer's activation.
    pub fn encode(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_batch(batch)?;
        let mut current = batch.to_owned();
        for i in 0..=self.bottleneck_index() {
            current = self.layer_forward(i, &current);
        }
        Ok(current)
    }

    /// Deep copy of every layer's parameters.
    pub fn export_layers(&self) -> Vec<LayerWeights> {
        self.layers.clone()
    }

    /// Replaces all parameters. Shapes must match the current layout exactly.
    pub fn import_layers(&mut self, layers: Vec<LayerWeights>) -> Result<()> {
        if layers.len() != self.layers.len() {
            return Err(Error::shape("layer count", self.layers.len(), layers.len()));
        }
        for (i, (new, old)) in layers.iter().zip(&self.layers).enumerate() {
            check_same_shape(i, new, old)?;
        }
        self.layers = layers;
        Ok(())
    }

    /// Replaces layers `1..len-1`, keeping the client-specific first and last layers.
    pub fn import_interior(&mut self, interior: &[LayerWeights]) -> Result<()> {
        let n = self.layers.len();
        if interior.len() != n - 2 {
            return Err(Error::shape("interior layer count", n - 2, interior.len()));
        }
        for (offset, new) in interior.iter().enumerate() {
            check_same_shape(offset + 1, new, &self.layers[offset + 1])?;
        }
        for (offset, new) in interior.iter().enumerate() {
            self.layers[offset + 1] = new.clone();
        }
        Ok(())
    }

    pub fn export_interior(&self) -> Vec<LayerWeights> {
        self.layers[1..self.layers.len() - 1].to_vec()
    }

    /// Mean squared reconstruction error over `data`.
    pub fn reconstruction_error(&self, data: &Matrix) -> Result<f64> {
        let out = self.forward(data)?;
        mse_loss(data, &out)
    }
}

fn check_same_shape(index: usize, new: &LayerWeights, old: &LayerWeights) -> Result<()> {
    new.validate(index)?;
    if new.shape() != old.shape() {
        return Err(Error::LayerMismatch {
            index,
            reason: format!(
                "expected {}x{}, got {}x{}",
                old.fan_in(),
                old.fan_out(),
                new.fan_in(),
                new.fan_out()
            ),
        });
    }
    Ok(())
}

fn chain_widths(layers: &[LayerWeights]) -> Vec<usize> {
    std::iter::once(layers[0].fan_in())
        .chain(layers.iter().map(LayerWeights::fan_out))
        .collect()
}

/// Mean of squared elementwise differences over all entries.
pub fn mse_loss(x: &Matrix, x_hat: &Matrix) -> Result<f64> {
    if x.dim() != x_hat.dim() {
        return Err(Error::shape(
            "mse operands",
            format!("{:?}", x.dim()),
            format!("{:?}", x_hat.dim()),
        ));
    }
    if x.is_empty() {
        return Err(Error::Empty("mse operands"));
    }
    let sum: f64 = x
        .iter()
        .zip(x_hat.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / x.len() as f64)
}
