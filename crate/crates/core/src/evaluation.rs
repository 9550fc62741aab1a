//! Confusion matrices, classification metrics and the test-size-weighted
//! server accuracy.

use serde::Serialize;

use crate::error::{Error, Result};

/// `counts[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.trace() as f64, self.total() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.counts {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= k || p >= k {
            return Err(Error::LabelOutOfRange { label: t.max(p), k });
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

// 0/0 is reported as 0 so metrics stay serializable.
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Per-class precision/recall/F1. With two classes the headline figures are
/// those of class 1; otherwise they are unweighted means over classes.
pub fn metrics(cm: &ConfusionMatrix) -> MetricSet {
    let k = cm.k();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = cm.counts[c][c] as f64;
            let predicted: u64 = (0..k).map(|r| cm.counts[r][c]).sum();
            let actual: u64 = cm.counts[c].iter().sum();
            let precision = ratio(tp, predicted as f64);
            let recall = ratio(tp, actual as f64);
            ClassMetrics {
                precision,
                recall,
                f1: ratio(2.0 * precision * recall, precision + recall),
            }
        })
        .collect();

    let (precision, recall, f1) = if k == 2 {
        let pos = per_class[1];
        (pos.precision, pos.recall, pos.f1)
    } else {
        let mean = |f: fn(&ClassMetrics) -> f64| {
            ratio(per_class.iter().map(f).sum::<f64>(), per_class.len() as f64)
        };
        (mean(|m| m.precision), mean(|m| m.recall), mean(|m| m.f1))
    };
    MetricSet {
        accuracy: cm.accuracy(),
        precision,
        recall,
        f1,
        per_class,
    }
}

/// Test-size-weighted mean of client accuracies.
pub fn server_accuracy(test_sizes: &[usize], accuracies: &[f64]) -> Result<f64> {
    if test_sizes.is_empty() {
        return Err(Error::Empty("server accuracy inputs"));
    }
    if test_sizes.len() != accuracies.len() {
        return Err(Error::LengthMismatch {
            left: test_sizes.len(),
            right: accuracies.len(),
        });
    }
    let total: usize = test_sizes.iter().sum();
    if total == 0 {
        return Err(Error::Empty("test sizes sum to zero"));
    }
    Ok(test_sizes
        .iter()
        .zip(accuracies)
        .map(|(&n, &a)| n as f64 / total as f64 * a)
        .sum())
}
