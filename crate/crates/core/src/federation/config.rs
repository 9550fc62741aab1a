//! Experiment description and its TOML file form.
//!
//! ```toml
//! [experiment]
//! rounds = 21
//! seed = 42
//! learning_rate = 1e-3
//! batch_size = 32
//! encoder_hidden = [105, 90, 75, 60]
//! bottleneck = 10
//!
//! [client.ciciot2023]
//! csv = "data/ciciot2023.csv"
//! label_col = "label"
//! k = 2
//! d = 98
//! test_per_class = 6000
//!
//! [client.synthetic]
//! synth = { k = 2, features = 12, per_class = 200, separation = 10.0, noise = 0.2, seed = 7 }
//! test_per_class = 50
//! ```
//!
//! Clients keep their declaration order; relative CSV paths are resolved
//! against the config file's directory.

use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::Deserialize;

use crate::dataprep::{LabelColumn, SynthSpec};
use crate::error::{Error, Result};
use crate::neuralnet::{OptimizerConfig, DEFAULT_BOTTLENECK, DEFAULT_ENCODER_HIDDEN};

pub const DEFAULT_ROUNDS: usize = 21;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_EPOCHS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        label_column: LabelColumn,
    },
    Synth(SynthSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientDescriptor {
    pub name: String,
    pub source: DataSource,
    /// Cluster count; defaults to the number of classes in the data.
    pub k: Option<usize>,
    /// Aggregation weight; defaults to the client's training-row count.
    pub d: Option<f64>,
    pub test_per_class: usize,
    pub train_fraction: f64,
    pub epochs_train: usize,
    pub epochs_repair: usize,
    pub encoder_hidden: Option<Vec<usize>>,
    pub bottleneck_dim: Option<usize>,
}

impl ClientDescriptor {
    pub fn new(name: impl Into<String>, source: DataSource, test_per_class: usize) -> Self {
        Self {
            name: name.into(),
            source,
            k: None,
            d: None,
            test_per_class,
            train_fraction: 0.8,
            epochs_train: DEFAULT_EPOCHS,
            epochs_repair: DEFAULT_EPOCHS,
            encoder_hidden: None,
            bottleneck_dim: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub clients: Vec<ClientDescriptor>,
    pub rounds: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub encoder_hidden: Vec<usize>,
    pub bottleneck_dim: usize,
    /// Worker threads for per-client steps; 0 lets the runtime decide.
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn new(clients: Vec<ClientDescriptor>) -> Self {
        Self {
            clients,
            rounds: DEFAULT_ROUNDS,
            seed: DEFAULT_SEED,
            optimizer: OptimizerConfig::default(),
            encoder_hidden: DEFAULT_ENCODER_HIDDEN.to_vec(),
            bottleneck_dim: DEFAULT_BOTTLENECK,
            threads: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.clients.is_empty() {
            return fail("at least one [client.<name>] section is required".into());
        }
        if self.rounds == 0 {
            return fail("experiment.rounds: must be at least 1".into());
        }
        self.optimizer
            .validate()
            .map_err(|e| Error::Config(format!("experiment: {e}")))?;
        for c in &self.clients {
            if let Some(d) = c.d {
                if !(d > 0.0 && d.is_finite()) {
                    return fail(format!("client.{}.d: must be positive, got {d}", c.name));
                }
            }
            if c.k == Some(0) {
                return fail(format!("client.{}.k: must be at least 1", c.name));
            }
            if c.test_per_class == 0 {
                return fail(format!(
                    "client.{}.test_per_class: must be at least 1",
                    c.name
                ));
            }
            if !(c.train_fraction > 0.0 && c.train_fraction < 1.0) {
                return fail(format!(
                    "client.{}.train_fraction: {} is outside (0, 1)",
                    c.name, c.train_fraction
                ));
            }
            if let DataSource::Synth(spec) = &c.source {
                spec.validate()
                    .map_err(|e| Error::Config(format!("client.{}.synth: {e}", c.name)))?;
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        raw.into_config(base_dir)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, base)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    experiment: RawExperiment,
    #[serde(default)]
    client: IndexMap<String, RawClient>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    rounds: Option<usize>,
    seed: Option<u64>,
    learning_rate: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    epsilon: Option<f64>,
    batch_size: Option<usize>,
    encoder_hidden: Option<Vec<usize>>,
    bottleneck: Option<usize>,
    threads: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClient {
    csv: Option<PathBuf>,
    synth: Option<SynthSpec>,
    label_col: Option<LabelColumn>,
    k: Option<usize>,
    d: Option<f64>,
    test_per_class: usize,
    train_fraction: Option<f64>,
    epochs_train: Option<usize>,
    epochs_repair: Option<usize>,
    encoder_hidden: Option<Vec<usize>>,
    bottleneck: Option<usize>,
}

impl RawConfig {
    fn into_config(self, base_dir: &Path) -> Result<ExperimentConfig> {
        let mut clients = Vec::with_capacity(self.client.len());
        for (name, raw) in self.client {
            let source = match (raw.csv, raw.synth) {
                (Some(path), None) => DataSource::Csv {
                    path: if path.is_absolute() {
                        path
                    } else {
                        base_dir.join(path)
                    },
                    label_column: raw.label_col.unwrap_or_default(),
                },
                (None, Some(spec)) => DataSource::Synth(spec),
                _ => {
                    return Err(Error::Config(format!(
                        "client.{name}: exactly one of `csv` or `synth` is required"
                    )))
                }
            };
            let mut desc = ClientDescriptor::new(name, source, raw.test_per_class);
            desc.k = raw.k;
            desc.d = raw.d;
            desc.train_fraction = raw.train_fraction.unwrap_or(desc.train_fraction);
            desc.epochs_train = raw.epochs_train.unwrap_or(desc.epochs_train);
            desc.epochs_repair = raw.epochs_repair.unwrap_or(desc.epochs_repair);
            desc.encoder_hidden = raw.encoder_hidden;
            desc.bottleneck_dim = raw.bottleneck;
            clients.push(desc);
        }
        let e = self.experiment;
        let defaults = OptimizerConfig::default();
        let config = ExperimentConfig {
            clients,
            rounds: e.rounds.unwrap_or(DEFAULT_ROUNDS),
            seed: e.seed.unwrap_or(DEFAULT_SEED),
            optimizer: OptimizerConfig {
                learning_rate: e.learning_rate.unwrap_or(defaults.learning_rate),
                beta1: e.beta1.unwrap_or(defaults.beta1),
                beta2: e.beta2.unwrap_or(defaults.beta2),
                epsilon: e.epsilon.unwrap_or(defaults.epsilon),
                batch_size: e.batch_size.unwrap_or(defaults.batch_size),
            },
            encoder_hidden: e
                .encoder_hidden
                .unwrap_or_else(|| DEFAULT_ENCODER_HIDDEN.to_vec()),
            bottleneck_dim: e.bottleneck.unwrap_or(DEFAULT_BOTTLENECK),
            threads: e.threads.unwrap_or(0),
        };
        config.validate()?;
        Ok(config)
    }
}
