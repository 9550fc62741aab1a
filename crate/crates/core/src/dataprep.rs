//! Dataset ingestion, min-max scaling, class-blocked splitting and synthetic
//! data generation.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
    pub k: usize,
}

impl LabeledDataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        k: usize,
    ) -> Result<Self> {
        if labels.len() != features.nrows() {
            return Err(Error::LengthMismatch {
                left: features.nrows(),
                right: labels.len(),
            });
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::LengthMismatch {
                left: features.ncols(),
                right: feature_names.len(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::LabelOutOfRange { label, k });
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            k,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            k: self.k,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = self.feature_names.clone();
        header.push("label".to_string());
        writer.write_record(&header)?;
        for (row, label) in self.features.rows().into_iter().zip(&self.labels) {
            let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            record.push(label.to_string());
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Which column carries the class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl LabelColumn {
    /// Digits select a zero-based index, anything else a header name.
    pub fn from_flag(flag: &str) -> Self {
        match flag.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(flag.to_string()),
        }
    }

    fn resolve(&self, header: &csv::StringRecord) -> Result<usize> {
        match self {
            LabelColumn::Index(i) if *i < header.len() => Ok(*i),
            LabelColumn::Index(i) => Err(Error::MissingLabelColumn(i.to_string())),
            LabelColumn::Name(name) => header
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::MissingLabelColumn(name.clone())),
        }
    }
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Name("label".into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCsv {
    pub dataset: LabeledDataset,
    /// Rows skipped because a cell was missing, unparseable or non-finite.
    pub dropped_rows: usize,
    /// Raw label value for each encoded class index.
    pub class_names: Vec<String>,
}

/// Reads a headered CSV. Raw labels that are all non-negative integers keep
/// their numeric order; any other label set is encoded by first appearance.
pub fn load_csv(path: &Path, label_column: &LabelColumn) -> Result<LoadedCsv> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let header = reader.headers()?.clone();
    let label_idx = label_column.resolve(&header)?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.trim().to_string())
        .collect();

    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    let mut dropped = 0;
    'rows: for record in reader.records() {
        let record = match record {
            Ok(r) if r.len() == header.len() => r,
            Ok(_) => {
                dropped += 1;
                continue;
            }
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                dropped += 1;
                continue;
            }
        };
        let label = record[label_idx].trim();
        if label.is_empty() {
            dropped += 1;
            continue;
        }
        let start = values.len();
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                continue;
            }
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    values.truncate(start);
                    dropped += 1;
                    continue 'rows;
                }
            }
        }
        raw_labels.push(label.to_string());
    }

    if raw_labels.is_empty() {
        return Err(Error::NoUsableRows {
            path: path.to_path_buf(),
            dropped,
        });
    }

    let (labels, class_names) = encode_labels(&raw_labels);
    let features = Array2::from_shape_vec((raw_labels.len(), feature_names.len()), values)
        .expect("every kept row has one value per feature");
    let k = class_names.len();
    Ok(LoadedCsv {
        dataset: LabeledDataset::new(features, labels, feature_names, k)?,
        dropped_rows: dropped,
        class_names,
    })
}

fn encode_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut distinct: Vec<&str> = Vec::new();
    let mut seen = HashMap::new();
    for label in raw {
        if !seen.contains_key(label.as_str()) {
            seen.insert(label.as_str(), distinct.len());
            distinct.push(label);
        }
    }
    let numeric: Option<Vec<u64>> = distinct.iter().map(|l| l.parse::<u64>().ok()).collect();
    if let Some(nums) = numeric {
        let mut order: Vec<usize> = (0..distinct.len()).collect();
        order.sort_by_key(|&i| nums[i]);
        for (code, &i) in order.iter().enumerate() {
            seen.insert(distinct[i], code);
        }
        distinct = order.iter().map(|&i| distinct[i]).collect();
    }
    let labels = raw.iter().map(|l| seen[l.as_str()]).collect();
    (labels, distinct.into_iter().map(String::from).collect())
}

/// Per-feature min/max fitted on one matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(features: &Matrix) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::Empty("scaler fitting data"));
        }
        let (min, max) = features
            .columns()
            .into_iter()
            .map(|col| {
                col.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    })
            })
            .unzip();
        Ok(Self { min, max })
    }

    /// `(x - min) / (max - min)`, without clamping. Constant features map to 0.
    pub fn transform(&self, features: &Matrix) -> Result<Matrix> {
        if features.ncols() != self.min.len() {
            return Err(Error::shape(
                "scaler features",
                self.min.len(),
                features.ncols(),
            ));
        }
        let mut out = features.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (lo, range) = (self.min[j], self.max[j] - self.min[j]);
            if range > 0.0 {
                col.mapv_inplace(|v| (v - lo) / range);
            } else {
                col.fill(0.0);
            }
        }
        Ok(out)
    }
}

pub fn fit_scaler(train_features: &Matrix) -> Result<MinMaxScaler> {
    MinMaxScaler::fit(train_features)
}

pub fn apply_scaler(scaler: &MinMaxScaler, features: &Matrix) -> Result<Matrix> {
    scaler.transform(features)
}

fn default_train_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_per_class: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(test_per_class: usize, seed: u64) -> Self {
        Self {
            test_per_class,
            train_fraction: default_train_fraction(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub train: LabeledDataset,
    pub validation: LabeledDataset,
    /// `test_per_class` rows per class, in contiguous blocks of ascending label.
    pub test: LabeledDataset,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

pub fn partition(ds: &LabeledDataset, split: &SplitSpec) -> Result<Partition> {
    if split.test_per_class == 0 {
        return Err(Error::InvalidSpec {
            field: "test_per_class",
            reason: "must be at least 1".into(),
        });
    }
    if !(split.train_fraction > 0.0 && split.train_fraction < 1.0) {
        return Err(Error::InvalidSpec {
            field: "train_fraction",
            reason: format!("{} is outside (0, 1)", split.train_fraction),
        });
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.k];
    for (i, &l) in ds.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = rng_from(split.seed);
    let mut test_indices = Vec::with_capacity(ds.k * split.test_per_class);
    let mut rest = Vec::with_capacity(ds.len());
    for (class, mut members) in by_class.into_iter().enumerate() {
        if members.len() < split.test_per_class {
            return Err(Error::InsufficientClass {
                class,
                needed: split.test_per_class,
                available: members.len(),
            });
        }
        members.shuffle(&mut rng);
        test_indices.extend_from_slice(&members[..split.test_per_class]);
        rest.extend_from_slice(&members[split.test_per_class..]);
    }
    rest.shuffle(&mut rng);
    let n_train = (rest.len() as f64 * split.train_fraction).round() as usize;
    let validation_indices = rest.split_off(n_train);
    let train_indices = rest;

    Ok(Partition {
        train: ds.subset(&train_indices),
        validation: ds.subset(&validation_indices),
        test: ds.subset(&test_indices),
        train_indices,
        validation_indices,
        test_indices,
    })
}

/// Splits fitted with a min-max scaler learned from the training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSplits {
    pub train: LabeledDataset,
    pub validation: LabeledDataset,
    pub test: LabeledDataset,
    pub scaler: MinMaxScaler,
}

pub fn prepare(ds: &LabeledDataset, split: &SplitSpec) -> Result<PreparedSplits> {
    let Partition {
        mut train,
        mut validation,
        mut test,
        ..
    } = partition(ds, split)?;
    if train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    if validation.is_empty() {
        return Err(Error::Empty("validation split"));
    }
    let scaler = MinMaxScaler::fit(&train.features)?;
    train.features = scaler.transform(&train.features)?;
    validation.features = scaler.transform(&validation.features)?;
    test.features = scaler.transform(&test.features)?;
    Ok(PreparedSplits {
        train,
        validation,
        test,
        scaler,
    })
}

/// Isotropic Gaussian classes; class `c` is centred at `c * separation` on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub k: usize,
    #[serde(alias = "features")]
    pub feature_count: usize,
    #[serde(alias = "per_class")]
    pub per_class_count: usize,
    #[serde(alias = "separation")]
    pub class_mean_separation: f64,
    #[serde(alias = "noise")]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let invalid = |field, reason: &str| {
            Err(Error::InvalidSpec {
                field,
                reason: reason.to_string(),
            })
        };
        if self.k < 2 {
            return invalid("k", "must be at least 2");
        }
        if self.feature_count == 0 {
            return invalid("feature_count", "must be at least 1");
        }
        if self.per_class_count == 0 {
            return invalid("per_class_count", "must be at least 1");
        }
        if !(self.class_mean_separation > 0.0 && self.class_mean_separation.is_finite()) {
            return invalid("class_mean_separation", "must be positive");
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return invalid("noise_std", "must be positive");
        }
        Ok(())
    }
}

pub fn synth_generate(spec: &SynthSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = rng_from(spec.seed);
    let rows = spec.k * spec.per_class_count;
    let mut values = Vec::with_capacity(rows * spec.feature_count);
    let mut labels = Vec::with_capacity(rows);
    for class in 0..spec.k {
        let normal = Normal::new(class as f64 * spec.class_mean_separation, spec.noise_std)
            .expect("validated std");
        for _ in 0..spec.per_class_count {
            values.extend((0..spec.feature_count).map(|_| normal.sample(&mut rng)));
            labels.push(class);
        }
    }
    let features =
        Array2::from_shape_vec((rows, spec.feature_count), values).expect("rows * features values");
    let names = (0..spec.feature_count).map(|j| format!("f{j}")).collect();
    LabeledDataset::new(features, labels, names, spec.k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::collections::HashSet;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn loads_numeric_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "a.csv", "a,b,label\n1,2,0\n3,4,1\n5,6,1\n");
        let loaded = load_csv(&path, &LabelColumn::Name("label".into())).unwrap();
        assert_eq!(
            loaded.dataset.features,
            array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]
        );
        assert_eq!(loaded.dataset.labels, vec![0, 1, 1]);
        assert_eq!(loaded.dataset.k, 2);
        assert_eq!(loaded.dataset.feature_names, vec!["a", "b"]);
        assert_eq!(loaded.dropped_rows, 0);
    }

    #[test]
    fn string_labels_follow_first_appearance() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "s.csv", "label,x\nbenign,1\nattack,2\nbenign,3\n");
        let loaded = load_csv(&path, &LabelColumn::Index(0)).unwrap();
        assert_eq!(loaded.dataset.labels, vec![0, 1, 0]);
        assert_eq!(loaded.class_names, vec!["benign", "attack"]);
        assert_eq!(loaded.dataset.feature_names, vec!["x"]);
    }

    #[test]
    fn integer_labels_keep_numeric_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "n.csv", "x,label\n1,1\n2,0\n3,1\n");
        let loaded = load_csv(&path, &LabelColumn::default()).unwrap();
        assert_eq!(loaded.dataset.labels, vec![1, 0, 1]);
    }

    #[test]
    fn bad_rows_are_dropped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "d.csv",
            "a,b,label\n1,NaN,0\n1,2,1\n,3,0\n4,x,1\n5,6,\n7,8\n9,10,0\n",
        );
        let loaded = load_csv(&path, &LabelColumn::default()).unwrap();
        assert_eq!(loaded.dataset.len(), 2);
        assert_eq!(loaded.dropped_rows, 5);
        assert!(loaded.dataset.features.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn single_nan_row_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "n.csv", "a,label\n1,0\nNaN,1\n2,1\n");
        let loaded = load_csv(&path, &LabelColumn::default()).unwrap();
        assert_eq!(loaded.dropped_rows, 1);
    }

    #[test]
    fn load_errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.csv");
        assert!(matches!(
            load_csv(&missing, &LabelColumn::default()),
            Err(Error::MissingFile(_))
        ));
        let path = write(&dir, "h.csv", "a,b\n1,2\n");
        assert!(matches!(
            load_csv(&path, &LabelColumn::default()),
            Err(Error::MissingLabelColumn(_))
        ));
        assert!(matches!(
            load_csv(&path, &LabelColumn::Index(5)),
            Err(Error::MissingLabelColumn(_))
        ));
        let path = write(&dir, "e.csv", "a,label\nfoo,1\n");
        assert!(matches!(
            load_csv(&path, &LabelColumn::default()),
            Err(Error::NoUsableRows { dropped: 1, .. })
        ));
    }

    #[test]
    fn scaler_examples() {
        let x = array![[0.0, 7.0], [5.0, 7.0], [10.0, 7.0]];
        let scaler = fit_scaler(&x).unwrap();
        let y = apply_scaler(&scaler, &x).unwrap();
        assert_eq!(y, array![[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]]);

        let scaler = fit_scaler(&array![[0.0], [10.0]]).unwrap();
        assert_eq!(
            apply_scaler(&scaler, &array![[20.0]]).unwrap(),
            array![[2.0]]
        );
        assert!(apply_scaler(&scaler, &array![[1.0, 2.0]]).is_err());
        assert!(fit_scaler(&Array2::zeros((0, 3))).is_err());
    }

    fn two_class(per_class: usize) -> LabeledDataset {
        synth_generate(&SynthSpec {
            k: 2,
            feature_count: 3,
            per_class_count: per_class,
            class_mean_separation: 5.0,
            noise_std: 1.0,
            seed: 4,
        })
        .unwrap()
    }

    #[test]
    fn partition_sizes_and_blocks() {
        let ds = two_class(100);
        let p = partition(&ds, &SplitSpec::new(10, 7)).unwrap();
        assert_eq!(p.test.len(), 20);
        assert_eq!(p.test.labels[..10], [0; 10]);
        assert_eq!(p.test.labels[10..], [1; 10]);
        assert_eq!(p.train.len(), 144);
        assert_eq!(p.validation.len(), 36);

        let all: Vec<usize> = p
            .train_indices
            .iter()
            .chain(&p.validation_indices)
            .chain(&p.test_indices)
            .copied()
            .collect();
        let set: HashSet<usize> = all.iter().copied().collect();
        assert_eq!(all.len(), 200);
        assert_eq!(set.len(), 200);

        let again = partition(&ds, &SplitSpec::new(10, 7)).unwrap();
        assert_eq!(again, p);
        let other = partition(&ds, &SplitSpec::new(10, 8)).unwrap();
        assert_ne!(other.test_indices, p.test_indices);
    }

    #[test]
    fn partition_eleven_classes() {
        let ds = synth_generate(&SynthSpec {
            k: 11,
            feature_count: 2,
            per_class_count: 1100,
            class_mean_separation: 1.0,
            noise_std: 0.1,
            seed: 1,
        })
        .unwrap();
        let p = partition(&ds, &SplitSpec::new(1000, 42)).unwrap();
        assert_eq!(p.test.len(), 11_000);
    }

    #[test]
    fn partition_rejects_small_class() {
        let ds = two_class(5);
        match partition(&ds, &SplitSpec::new(6, 0)).unwrap_err() {
            Error::InsufficientClass {
                class,
                needed,
                available,
            } => {
                assert_eq!((class, needed, available), (0, 6, 5));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn prepare_scales_train_into_unit_range() {
        let ds = two_class(50);
        let prepared = prepare(&ds, &SplitSpec::new(5, 3)).unwrap();
        assert!(prepared
            .train
            .features
            .iter()
            .all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(prepared.scaler.min.len(), 3);
    }

    #[test]
    fn synth_construction() {
        let spec = SynthSpec {
            k: 2,
            feature_count: 4,
            per_class_count: 50,
            class_mean_separation: 10.0,
            noise_std: 0.1,
            seed: 12,
        };
        let ds = synth_generate(&spec).unwrap();
        assert_eq!(ds.class_counts(), vec![50, 50]);
        let mean = |c: usize| {
            let rows: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == c).collect();
            ds.features
                .select(Axis(0), &rows)
                .mean_axis(Axis(0))
                .unwrap()
        };
        let gap = &mean(1) - &mean(0);
        assert!(gap.iter().all(|&g| g >= 50.0 * 0.1));
        assert_eq!(synth_generate(&spec).unwrap(), ds);
        assert!(synth_generate(&SynthSpec { k: 1, ..spec }).is_err());
        assert!(synth_generate(&SynthSpec {
            noise_std: 0.0,
            ..spec
        })
        .is_err());
    }

    #[test]
    fn csv_export_round_trips() {
        let ds = two_class(4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        ds.save_csv(&path).unwrap();
        let back = load_csv(&path, &LabelColumn::default()).unwrap();
        assert_eq!(back.dataset, ds);
    }
}
