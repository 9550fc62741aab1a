//! `fedae`: run federated autoencoder experiments, generate synthetic data,
//! and inspect saved models.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedae_core::dataprep::{synth_generate, LabelColumn, SynthSpec};
use fedae_core::federation::{
    run_experiment_with, BestRound, DataSource, ExperimentConfig, RoundReport,
};
use fedae_core::neuralnet::persist;
use fedae_core::Matrix;
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "fedae",
    version,
    about = "Federated autoencoder anomaly detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Label column (name or zero-based index) for every CSV client.
        #[arg(long)]
        label_col: Option<String>,
        /// Write each round's confusion matrices under `<out>/cm/`.
        #[arg(long)]
        dump_cm: bool,
        /// Write each round's K-means centroids under `<out>/centroids/`.
        #[arg(long)]
        dump_centroids: bool,
    },
    /// Write a labelled CSV of Gaussian class blobs.
    Synth {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        per_class: usize,
        #[arg(long)]
        features: usize,
        #[arg(long)]
        separation: f64,
        #[arg(long)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the layer shapes and parameter totals of a saved model.
    Inspect { model: PathBuf },
}

/// Failure with its exit status: 2 for bad input, 1 for runtime errors.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(e: impl std::fmt::Display) -> Self {
        Self {
            code: 2,
            message: e.to_string(),
        }
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            rounds,
            seed,
            label_col,
            dump_cm,
            dump_centroids,
        } => {
            let opts = RunOptions {
                dump_cm,
                dump_centroids,
            };
            load_config(&config, rounds, seed, label_col.as_deref())
                .and_then(|cfg| cmd_run(&cfg, &out, opts))
        }
        Command::Synth {
            k,
            per_class,
            features,
            separation,
            noise,
            seed,
            out,
        } => cmd_synth(
            &SynthSpec {
                k,
                feature_count: features,
                per_class_count: per_class,
                class_mean_separation: separation,
                noise_std: noise,
                seed,
            },
            &out,
        ),
        Command::Inspect { model } => cmd_inspect(&model),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(
    path: &Path,
    rounds: Option<usize>,
    seed: Option<u64>,
    label_col: Option<&str>,
) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::from_file(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    if let Some(r) = rounds {
        cfg.rounds = r;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(flag) = label_col {
        for client in &mut cfg.clients {
            if let DataSource::Csv { label_column, .. } = &mut client.source {
                *label_column = LabelColumn::from_flag(flag);
            }
        }
    }
    if let Ok(value) = std::env::var("FEDAE_THREADS") {
        cfg.threads = value.trim().parse().map_err(|_| {
            Failure::input(format!("FEDAE_THREADS: expected a count, got {value:?}"))
        })?;
    }
    cfg.validate().map_err(Failure::input)?;
    Ok(cfg)
}

#[derive(Clone, Copy)]
struct RunOptions {
    dump_cm: bool,
    dump_centroids: bool,
}

#[derive(Serialize)]
struct MetricsSummary {
    aligned_accuracy: f64,
    precision: f64,
    recall: f64,
    f1: f64,
}

#[derive(Serialize)]
struct ClientSummary {
    name: String,
    best_round: usize,
    best: MetricsSummary,
    final_round: MetricsSummary,
    model: String,
}

#[derive(Serialize)]
struct Summary {
    rounds: usize,
    seed: u64,
    final_server_accuracy: f64,
    clients: Vec<ClientSummary>,
}

fn cmd_run(cfg: &ExperimentConfig, out: &Path, opts: RunOptions) -> CliResult {
    fs::create_dir_all(out).map_err(|e| Failure::runtime(format!("{}: {e}", out.display())))?;
    let summary_path = out.join("summary.json");
    if summary_path.exists() {
        fs::remove_file(&summary_path).map_err(Failure::runtime)?;
    }
    for (flag, dir) in [(opts.dump_cm, "cm"), (opts.dump_centroids, "centroids")] {
        if flag {
            fs::create_dir_all(out.join(dir)).map_err(Failure::runtime)?;
        }
    }

    let mut jsonl =
        BufWriter::new(File::create(out.join("rounds.jsonl")).map_err(Failure::runtime)?);
    let total = cfg.rounds;
    let result = run_experiment_with(cfg, |report| {
        write_round(&mut jsonl, out, report, opts).map_err(fedae_core::Error::Io)?;
        eprintln!(
            "round {}/{} server_accuracy={:.4}",
            report.round + 1,
            total,
            report.server_accuracy
        );
        Ok(())
    })
    .map_err(Failure::runtime)?;
    jsonl.flush().map_err(Failure::runtime)?;

    let models = out.join("models");
    fs::create_dir_all(&models).map_err(Failure::runtime)?;
    let mut model_paths = Vec::new();
    for client in &result.clients {
        let name = format!("{}.fedae", client.name);
        persist::save(&client.model, &models.join(&name)).map_err(Failure::runtime)?;
        model_paths.push(format!("models/{name}"));
    }

    let last = result.reports.last().expect("at least one round");
    let clients = result
        .best_rounds()
        .into_iter()
        .zip(&last.clients)
        .zip(model_paths)
        .map(|((best, fin), model)| ClientSummary {
            best: summary_of(&best),
            best_round: best.round,
            name: best.name,
            final_round: MetricsSummary {
                aligned_accuracy: fin.evaluation.aligned_accuracy,
                precision: fin.evaluation.precision,
                recall: fin.evaluation.recall,
                f1: fin.evaluation.f1,
            },
            model,
        })
        .collect();
    let summary = Summary {
        rounds: result.reports.len(),
        seed: cfg.seed,
        final_server_accuracy: last.server_accuracy,
        clients,
    };
    let tmp = out.join("summary.json.tmp");
    let text = serde_json::to_string_pretty(&summary).map_err(Failure::runtime)?;
    fs::write(&tmp, text + "\n").map_err(Failure::runtime)?;
    fs::rename(&tmp, &summary_path).map_err(Failure::runtime)?;
    Ok(())
}

fn summary_of(best: &BestRound) -> MetricsSummary {
    MetricsSummary {
        aligned_accuracy: best.aligned_accuracy,
        precision: best.precision,
        recall: best.recall,
        f1: best.f1,
    }
}

fn write_round<W: Write>(
    jsonl: &mut W,
    out: &Path,
    report: &RoundReport,
    opts: RunOptions,
) -> std::io::Result<()> {
    serde_json::to_writer(&mut *jsonl, report)?;
    jsonl.write_all(b"\n")?;
    jsonl.flush()?;
    for client in &report.clients {
        let stem = format!("round_{:03}_{}.csv", report.round, client.name);
        if opts.dump_cm {
            fs::write(
                out.join("cm").join(&stem),
                client.evaluation.confusion_matrix.to_csv(),
            )?;
        }
        if opts.dump_centroids {
            fs::write(
                out.join("centroids").join(&stem),
                matrix_csv(&client.evaluation.centroids),
            )?;
        }
    }
    Ok(())
}

fn matrix_csv(m: &Matrix) -> String {
    m.rows()
        .into_iter()
        .map(|row| row.iter().map(f64::to_string).collect::<Vec<_>>().join(",") + "\n")
        .collect()
}

fn cmd_synth(spec: &SynthSpec, out: &Path) -> CliResult {
    let dataset = synth_generate(spec).map_err(Failure::input)?;
    dataset
        .save_csv(out)
        .map_err(|e| Failure::runtime(format!("{}: {e}", out.display())))
}

fn cmd_inspect(path: &Path) -> CliResult {
    let model =
        persist::load(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    println!("{:<8} {:<14} {:>10}", "layer", "shape", "params");
    for (i, layer) in model.layers().iter().enumerate() {
        let (fan_in, fan_out) = layer.shape();
        println!(
            "{:<8} {:<14} {:>10}",
            i,
            format!("{fan_in} x {fan_out}"),
            group_thousands(layer.param_count())
        );
    }
    println!("bottleneck layer: {}", model.bottleneck_index());
    println!("Total params: {}", group_thousands(model.param_count()));
    Ok(())
}

fn group_thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}
