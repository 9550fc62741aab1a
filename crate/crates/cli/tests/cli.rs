use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SYNTHETIC: &str = r#"
[experiment]
rounds = 5
seed = 42
encoder_hidden = [32, 16]
bottleneck = 4

[client.alpha]
synth = { k = 2, features = 12, per_class = 200, separation = 10.0, noise = 0.2, seed = 101 }
test_per_class = 50

[client.beta]
synth = { k = 2, features = 10, per_class = 200, separation = 10.0, noise = 0.2, seed = 202 }
test_per_class = 50

[client.gamma]
synth = { k = 3, features = 16, per_class = 200, separation = 10.0, noise = 0.2, seed = 303 }
test_per_class = 50
"#;

/// Key paths of one round record; `clients[]` entries share one key set.
const GOLDEN_KEYS: &str = include_str!("golden/round_keys.txt");

fn fedae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedae"))
        .args(args)
        .env("FEDAE_THREADS", "2")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("experiment.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_rounds(out: &Path) -> Vec<Value> {
    fs::read_to_string(out.join("rounds.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn key_paths(record: &Value) -> BTreeSet<String> {
    let mut paths = BTreeSet::new();
    for (key, value) in record.as_object().unwrap() {
        paths.insert(key.clone());
        if let Some(clients) = value.as_array() {
            for client in clients {
                for inner in client.as_object().unwrap().keys() {
                    paths.insert(format!("{key}[].{inner}"));
                }
            }
        }
    }
    paths
}

#[test]
fn run_writes_stable_reports_and_models() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SYNTHETIC);
    let out = dir.path().join("out");
    let status = fedae(&[
        "run",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--dump-cm",
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );

    let rounds = read_rounds(&out);
    assert_eq!(rounds.len(), 5);
    for (i, record) in rounds.iter().enumerate() {
        let golden: BTreeSet<String> = GOLDEN_KEYS.lines().map(str::to_string).collect();
        assert_eq!(key_paths(record), golden);
        assert_eq!(record["round"], i);
        for client in record["clients"].as_array().unwrap() {
            assert_eq!(client.as_object().unwrap().len(), 14);
            assert_eq!(client["private_layers_preserved"], true);
        }
    }

    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rounds"], 5);
    for client in summary["clients"].as_array().unwrap() {
        assert!(client["best"]["aligned_accuracy"].as_f64().unwrap() >= 0.95);
        let model = out.join(client["model"].as_str().unwrap());
        assert!(model.is_file());
    }
    assert!(out.join("cm/round_004_gamma.csv").is_file());
    assert!(!out.join("summary.json.tmp").exists());

    let inspect = fedae(&["inspect", out.join("models/alpha.fedae").to_str().unwrap()]);
    assert!(inspect.status.success());
    let text = String::from_utf8(inspect.stdout).unwrap();
    assert!(
        text.contains("12 x 32") && text.contains("32 x 12"),
        "{text}"
    );
}

#[test]
fn rounds_override_limits_records() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SYNTHETIC);
    let out = dir.path().join("out");
    let status = fedae(&[
        "run",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--rounds",
        "1",
    ]);
    assert!(status.status.success());
    assert_eq!(read_rounds(&out).len(), 1);
}

#[test]
fn csv_clients_from_synth_output() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("blobs.csv");
    let synth = fedae(&[
        "synth",
        "--k",
        "2",
        "--per-class",
        "100",
        "--features",
        "10",
        "--separation",
        "8",
        "--noise",
        "0.3",
        "--seed",
        "4",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(synth.status.success());
    let config = write_config(
        dir.path(),
        "[experiment]\nrounds = 2\nencoder_hidden = [16, 8]\nbottleneck = 3\n\n\
         [client.one]\ncsv = \"blobs.csv\"\nd = 1\ntest_per_class = 20\n\n\
         [client.two]\ncsv = \"blobs.csv\"\nd = 98\ntest_per_class = 20\n",
    );
    let out = dir.path().join("out");
    let run = fedae(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert_eq!(read_rounds(&out).len(), 2);
}

#[test]
fn config_errors_exit_2_without_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), "[experiment]\nrounds = \"many\"\n");
    let run = fedae(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("line 2"));
    assert!(!out.join("summary.json").exists());

    let config = write_config(
        dir.path(),
        "[client.a]\ncsv = \"a.csv\"\ntest_per_class = 3\nd = 0\n",
    );
    let run = fedae(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("client.a.d"));

    let missing = dir.path().join("absent.toml");
    let run = fedae(&[
        "run",
        "--config",
        missing.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1_without_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "[client.a]\ncsv = \"absent.csv\"\ntest_per_class = 3\n",
    );
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join("summary.json"), "{}").unwrap();
    let run = fedae(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("absent.csv"), "{stderr}");
    assert!(!out.join("summary.json").exists());
}

#[test]
fn synth_is_deterministic_and_balanced() {
    let dir = tempfile::tempdir().unwrap();
    let make = |name: &str, k: &str, per_class: &str| {
        let path = dir.path().join(name);
        let out = fedae(&[
            "synth",
            "--k",
            k,
            "--per-class",
            per_class,
            "--features",
            "10",
            "--separation",
            "5",
            "--noise",
            "1",
            "--seed",
            "9",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        fs::read_to_string(path).unwrap()
    };
    let a = make("a.csv", "2", "100");
    assert_eq!(a, make("b.csv", "2", "100"));
    let mut lines = a.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 11);
    assert_eq!(*header.last().unwrap(), "label");
    assert_eq!(lines.count(), 200);

    let eleven = make("c.csv", "11", "50");
    let mut histogram = [0usize; 11];
    for line in eleven.lines().skip(1) {
        histogram[line.rsplit(',').next().unwrap().parse::<usize>().unwrap()] += 1;
    }
    assert_eq!(histogram, [50; 11]);
}

#[test]
fn synth_unwritable_path_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing-dir").join("x.csv");
    let out = fedae(&[
        "synth",
        "--k",
        "2",
        "--per-class",
        "5",
        "--features",
        "2",
        "--separation",
        "1",
        "--noise",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn inspect_reports_totals_and_rejects_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let model = fedae_core::neuralnet::build_autoencoder(
        fedae_core::neuralnet::AutoencoderSpec::default_chain(45),
        1,
    )
    .unwrap();
    let path = dir.path().join("m.fedae");
    fedae_core::neuralnet::persist::save(&model, &path).unwrap();
    let out = fedae(&["inspect", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Total params: 52,765"), "{text}");
    for shape in ["45 x 105", "60 x 10", "105 x 45"] {
        assert!(text.contains(shape), "{text}");
    }

    let bytes = fs::read(&path).unwrap();
    let truncated = dir.path().join("t.fedae");
    fs::write(&truncated, &bytes[..bytes.len() / 2]).unwrap();
    assert_eq!(
        fedae(&["inspect", truncated.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    let mut bad = bytes.clone();
    bad[0] = b'X';
    let bad_magic = dir.path().join("b.fedae");
    fs::write(&bad_magic, bad).unwrap();
    assert_eq!(
        fedae(&["inspect", bad_magic.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    let absent = dir.path().join("none.fedae");
    assert_eq!(
        fedae(&["inspect", absent.to_str().unwrap()]).status.code(),
        Some(2)
    );
}
