//! Dense autoencoder engine: architecture, forward/encode, MSE, backprop,
//! Adam, and the FEDAE persistence format.

mod model;
pub mod persist;
mod train;

pub use model::{
    mse_loss, Activation, AutoencoderModel, AutoencoderSpec, LayerWeights, DEFAULT_BOTTLENECK,
    DEFAULT_ENCODER_HIDDEN,
};
pub use train::{loss_and_gradients, train, Adam, OptimizerConfig, TrainingReport};

/// Builds a model; see [`AutoencoderModel::build`].
pub fn build_autoencoder(spec: AutoencoderSpec, seed: u64) -> crate::Result<AutoencoderModel> {
    AutoencoderModel::build(spec, seed)
}
