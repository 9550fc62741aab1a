//! Unsupervised federated anomaly detection across clients whose feature
//! spaces differ.
//!
//! Each client trains a mirrored dense autoencoder on its own data. Only the
//! interior layers, whose shapes are the same for every client, are averaged
//! by the server; the client-specific input and output layers never leave the
//! client. After splicing the averaged layers back in, each client fine-tunes
//! on its validation split, encodes its test split through the bottleneck,
//! clusters the latent codes with K-means and aligns cluster indices with the
//! ground-truth labels before scoring.
//!
//! Modules, bottom-up:
//!
//! - [`neuralnet`]: autoencoder, backprop, Adam, FEDAE model files
//! - [`dataprep`]: CSV ingestion, min-max scaling, class-blocked splits, synthetic data
//! - [`clustering`]: seeded k-means++ / Lloyd
//! - [`alignment`]: binary inversion check and frequency-based multi-class alignment
//! - [`evaluation`]: confusion matrices, precision/recall/F1, weighted server accuracy
//! - [`federation`]: common-layer aggregation, splice-and-repair, round orchestration

pub mod alignment;
pub mod clustering;
pub mod dataprep;
pub mod error;
pub mod evaluation;
pub mod federation;
pub mod neuralnet;
pub mod rng;

pub use error::{Error, Result};

/// Dense row-major matrix of `f64`, used for batches, weights and latents.
pub type Matrix = ndarray::Array2<f64>;
