//! Round orchestration: local training, aggregation, splice-and-repair and
//! evaluation, repeated for the configured number of rounds.

use rayon::prelude::*;
use serde::Serialize;

use super::aggregate::{aggregate, CommonLayerSet};
use super::client::{
    splice_and_repair, ClientEvaluation, ClientState, SpliceReport, STREAM_KMEANS, STREAM_REPAIR,
    STREAM_TRAIN,
};
use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::evaluation::server_accuracy;
use crate::neuralnet::OptimizerConfig;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClientRoundReport {
    pub name: String,
    pub test_size: usize,
    /// Mean loss of the last local-training epoch.
    pub train_loss: Option<f64>,
    #[serde(flatten)]
    pub evaluation: ClientEvaluation,
    #[serde(flatten)]
    pub splice: SpliceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundReport {
    pub round: usize,
    /// Test-size-weighted mean of the clients' aligned accuracies.
    pub server_accuracy: f64,
    pub clients: Vec<ClientRoundReport>,
}

fn tag<T>(result: Result<T>, client: &ClientState) -> Result<T> {
    result.map_err(|e| e.for_client(&client.name))
}

/// One federated round over `clients`, mutating their models in place.
///
/// Client-side steps run in parallel on the current rayon pool; aggregation
/// waits for every client to finish local training.
pub fn run_round(
    clients: &mut [ClientState],
    opt: &OptimizerConfig,
    seed: u64,
    round_index: usize,
) -> Result<RoundReport> {
    let round = round_index as u64;
    let train_reports = clients
        .par_iter_mut()
        .enumerate()
        .map(|(i, c)| {
            let s = derive_seed(seed, &[STREAM_TRAIN, round, i as u64]);
            let report = c.local_train(opt, s);
            tag(report, c)
        })
        .collect::<Result<Vec<_>>>()?;

    let sets: Vec<CommonLayerSet> = clients.iter().map(ClientState::common_layers).collect();
    let weights: Vec<f64> = clients.iter().map(|c| c.d).collect();
    let averaged = aggregate(&sets, &weights)?;

    let splices = clients
        .par_iter_mut()
        .enumerate()
        .map(|(i, c)| {
            let s = derive_seed(seed, &[STREAM_REPAIR, round, i as u64]);
            let report = splice_and_repair(c, &averaged, opt, s);
            tag(report, c)
        })
        .collect::<Result<Vec<_>>>()?;

    let evaluations = clients
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            tag(
                c.evaluate(derive_seed(seed, &[STREAM_KMEANS, round, i as u64])),
                c,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let sizes: Vec<usize> = clients.iter().map(|c| c.test.len()).collect();
    let accuracies: Vec<f64> = evaluations.iter().map(|e| e.aligned_accuracy).collect();
    let server = server_accuracy(&sizes, &accuracies)?;

    let reports = clients
        .iter()
        .zip(train_reports)
        .zip(splices)
        .zip(evaluations)
        .map(|(((c, t), splice), evaluation)| ClientRoundReport {
            name: c.name.clone(),
            test_size: c.test.len(),
            train_loss: t.epoch_losses.last().copied(),
            evaluation,
            splice,
        })
        .collect();
    Ok(RoundReport {
        round: round_index,
        server_accuracy: server,
        clients: reports,
    })
}

/// Builds every client and checks that their interior layers line up.
pub fn setup_clients(config: &ExperimentConfig) -> Result<Vec<ClientState>> {
    config.validate()?;
    let clients = config
        .clients
        .iter()
        .enumerate()
        .map(|(i, desc)| {
            ClientState::from_descriptor(desc, i, config).map_err(|e| e.for_client(&desc.name))
        })
        .collect::<Result<Vec<_>>>()?;
    let reference = clients[0].common_layers().shapes();
    for c in &clients[1..] {
        let shapes = c.common_layers().shapes();
        if shapes != reference {
            return Err(Error::Config(format!(
                "client.{}: interior layer shapes {:?} differ from client.{} {:?}",
                c.name, shapes, clients[0].name, reference
            )));
        }
    }
    Ok(clients)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestRound {
    pub name: String,
    pub round: usize,
    pub aligned_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Round with the highest aligned accuracy for each client (earliest on ties).
pub fn best_rounds(reports: &[RoundReport]) -> Vec<BestRound> {
    let Some(first) = reports.first() else {
        return Vec::new();
    };
    (0..first.clients.len())
        .map(|i| {
            let best = reports.iter().fold(&reports[0], |best, r| {
                if r.clients[i].evaluation.aligned_accuracy
                    > best.clients[i].evaluation.aligned_accuracy
                {
                    r
                } else {
                    best
                }
            });
            let c = &best.clients[i];
            BestRound {
                name: c.name.clone(),
                round: best.round,
                aligned_accuracy: c.evaluation.aligned_accuracy,
                precision: c.evaluation.precision,
                recall: c.evaluation.recall,
                f1: c.evaluation.f1,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub reports: Vec<RoundReport>,
    /// Client state after the final round.
    pub clients: Vec<ClientState>,
}

impl ExperimentResult {
    pub fn best_rounds(&self) -> Vec<BestRound> {
        best_rounds(&self.reports)
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with(config, |_| Ok(()))
}

/// Like [`run_experiment`], calling `on_round` as soon as each round finishes.
pub fn run_experiment_with<F>(
    config: &ExperimentConfig,
    mut on_round: F,
) -> Result<ExperimentResult>
where
    F: FnMut(&RoundReport) -> Result<()>,
{
    let mut clients = setup_clients(config)?;
    let pool = if config.threads > 0 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let mut reports = Vec::with_capacity(config.rounds);
    for round in 0..config.rounds {
        let report = match &pool {
            Some(pool) => {
                pool.install(|| run_round(&mut clients, &config.optimizer, config.seed, round))
            }
            None => run_round(&mut clients, &config.optimizer, config.seed, round),
        }?;
        on_round(&report)?;
        reports.push(report);
    }
    Ok(ExperimentResult { reports, clients })
}
