//! Federated orchestration over clients with heterogeneous input widths.
//!
//! Only the interior layers (all but the first and last) are shared; they
//! must have identical shapes for every client. The server is a stateless
//! weighted averager.

mod aggregate;
mod client;
mod config;
mod experiment;

pub use aggregate::{aggregate, CommonLayerSet};
pub use client::{splice_and_repair, ClientEvaluation, ClientState, SpliceReport};
pub use config::{
    ClientDescriptor, DataSource, ExperimentConfig, DEFAULT_EPOCHS, DEFAULT_ROUNDS, DEFAULT_SEED,
};
pub use experiment::{
    best_rounds, run_experiment, run_experiment_with, run_round, setup_clients, BestRound,
    ClientRoundReport, ExperimentResult, RoundReport,
};
