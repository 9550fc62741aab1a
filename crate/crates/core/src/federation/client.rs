//! A federated participant: its data splits, model, and the per-round
//! client-side steps.

use serde::Serialize;

use super::aggregate::CommonLayerSet;
use super::config::{ClientDescriptor, DataSource, ExperimentConfig};
use crate::alignment::{align_binary, align_multiclass};
use crate::clustering::kmeans;
use crate::dataprep::{load_csv, prepare, synth_generate, LabeledDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::evaluation::{confusion, metrics, ClassMetrics, ConfusionMatrix};
use crate::neuralnet::{train, AutoencoderModel, AutoencoderSpec, OptimizerConfig, TrainingReport};
use crate::rng::derive_seed;
use crate::Matrix;

// Stream identifiers mixed into derived seeds.
pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_SPLIT: u64 = 2;
pub(crate) const STREAM_SYNTH: u64 = 3;
pub(crate) const STREAM_TRAIN: u64 = 4;
pub(crate) const STREAM_REPAIR: u64 = 5;
pub(crate) const STREAM_KMEANS: u64 = 6;

#[derive(Debug, Clone)]
pub struct ClientState {
    pub name: String,
    pub train: LabeledDataset,
    pub validation: LabeledDataset,
    /// Class-blocked test split, `test_per_class` rows per class.
    pub test: LabeledDataset,
    pub model: AutoencoderModel,
    pub k: usize,
    pub d: f64,
    pub test_per_class: usize,
    pub epochs_train: usize,
    pub epochs_repair: usize,
}

impl ClientState {
    /// Loads or generates the client's data, splits and scales it, and builds
    /// the round-0 model.
    pub fn from_descriptor(
        desc: &ClientDescriptor,
        index: usize,
        config: &ExperimentConfig,
    ) -> Result<Self> {
        let dataset = match &desc.source {
            DataSource::Csv { path, label_column } => load_csv(path, label_column)?.dataset,
            DataSource::Synth(spec) => {
                let mut spec = *spec;
                if spec.seed == 0 {
                    spec.seed = derive_seed(config.seed, &[STREAM_SYNTH, index as u64]);
                }
                synth_generate(&spec)?
            }
        };
        let k = desc.k.unwrap_or(dataset.k);
        if k != dataset.k {
            return Err(Error::Config(format!(
                "client.{}.k = {k}, but the data has {} classes",
                desc.name, dataset.k
            )));
        }
        let split = SplitSpec {
            test_per_class: desc.test_per_class,
            train_fraction: desc.train_fraction,
            seed: derive_seed(config.seed, &[STREAM_SPLIT, index as u64]),
        };
        let prepared = prepare(&dataset, &split)?;
        let spec = AutoencoderSpec::new(
            dataset.feature_count(),
            desc.encoder_hidden
                .clone()
                .unwrap_or_else(|| config.encoder_hidden.clone()),
            desc.bottleneck_dim.unwrap_or(config.bottleneck_dim),
        );
        let model =
            AutoencoderModel::build(spec, derive_seed(config.seed, &[STREAM_INIT, index as u64]))?;
        let d = desc.d.unwrap_or(prepared.train.len() as f64);
        Ok(Self {
            name: desc.name.clone(),
            train: prepared.train,
            validation: prepared.validation,
            test: prepared.test,
            model,
            k,
            d,
            test_per_class: desc.test_per_class,
            epochs_train: desc.epochs_train,
            epochs_repair: desc.epochs_repair,
        })
    }

    pub fn local_train(&mut self, opt: &OptimizerConfig, seed: u64) -> Result<TrainingReport> {
        if self.epochs_train == 0 {
            return Ok(TrainingReport {
                epoch_losses: Vec::new(),
                epochs_run: 0,
                samples_seen: 0,
            });
        }
        train(
            &mut self.model,
            &self.train.features,
            self.epochs_train,
            opt,
            seed,
        )
    }

    pub fn common_layers(&self) -> CommonLayerSet {
        CommonLayerSet {
            layers: self.model.export_interior(),
        }
    }

    /// Encodes the test split, clusters it and scores the aligned clustering.
    pub fn evaluate(&self, seed: u64) -> Result<ClientEvaluation> {
        let latents = self.model.encode(&self.test.features)?;
        let clusters = kmeans(&latents, self.k, seed)?;
        let outcome = if self.k == 2 {
            align_binary(&self.test.labels, &clusters.labels)?
        } else {
            align_multiclass(
                &self.test.labels,
                &clusters.labels,
                self.k,
                self.test_per_class,
            )?
        };
        let cm = confusion(&self.test.labels, &outcome.labels, self.k)?;
        let m = metrics(&cm);
        Ok(ClientEvaluation {
            aligned_accuracy: outcome.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            per_class: m.per_class,
            confusion_matrix: cm,
            best_mapping_applied: outcome.corrected,
            centroids: clusters.centroids,
            inertia: clusters.inertia,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClientEvaluation {
    pub aligned_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion_matrix: ConfusionMatrix,
    pub best_mapping_applied: bool,
    #[serde(skip)]
    pub centroids: Matrix,
    pub inertia: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpliceReport {
    /// First and last layers bitwise unchanged by the splice itself.
    pub private_layers_preserved: bool,
    pub validation_mse_spliced: f64,
    pub validation_mse_repaired: f64,
}

/// Swaps the averaged interior into the client model, then fine-tunes the
/// whole model on the validation split for `epochs_repair` epochs.
pub fn splice_and_repair(
    client: &mut ClientState,
    averaged: &CommonLayerSet,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<SpliceReport> {
    let layers = client.model.layers();
    let first = layers[0].clone();
    let last = layers[layers.len() - 1].clone();

    client.model.import_interior(&averaged.layers)?;

    let layers = client.model.layers();
    let private_layers_preserved =
        layers[0].bitwise_eq(&first) && layers[layers.len() - 1].bitwise_eq(&last);
    let features = &client.validation.features;
    let spliced = client.model.reconstruction_error(features)?;
    let repaired = if client.epochs_repair > 0 {
        train(&mut client.model, features, client.epochs_repair, opt, seed)?;
        client.model.reconstruction_error(features)?
    } else {
        spliced
    };
    Ok(SpliceReport {
        private_layers_preserved,
        validation_mse_spliced: spliced,
        validation_mse_repaired: repaired,
    })
}
