//! Mapping arbitrary cluster indices onto ground-truth labels.
//!
//! Two procedures are provided: an inversion check for the binary anomaly
//! case, and a frequency-based greedy assignment for the multi-class case
//! that relies on the test split being laid out as one contiguous block of
//! equal size per class. Both return the corrected labelling only when it is
//! strictly more accurate than the raw cluster indices.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentOutcome {
    pub labels: Vec<usize>,
    pub accuracy: f64,
    /// `mapping[cluster] = class`, present whenever a candidate mapping was built.
    pub mapping: Option<Vec<usize>>,
    pub corrected: bool,
}

pub fn accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::Empty("label vectors"));
    }
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

pub fn align_binary(y_true: &[usize], y_pred: &[usize]) -> Result<AlignmentOutcome> {
    if let Some(&bad) = y_true.iter().chain(y_pred).find(|&&v| v > 1) {
        return Err(Error::NonBinaryLabel(bad));
    }
    let original = accuracy(y_true, y_pred)?;
    let inverted: Vec<usize> = y_pred.iter().map(|&v| 1 - v).collect();
    let inverted_accuracy = accuracy(y_true, &inverted)?;
    Ok(if inverted_accuracy > original {
        AlignmentOutcome {
            labels: inverted,
            accuracy: inverted_accuracy,
            mapping: Some(vec![1, 0]),
            corrected: true,
        }
    } else {
        AlignmentOutcome {
            labels: y_pred.to_vec(),
            accuracy: original,
            mapping: Some(vec![0, 1]),
            corrected: false,
        }
    })
}

/// Cluster counts within one block, most frequent first, ties by ascending index.
fn frequency_distribution(segment: &[usize], k: usize) -> Vec<(usize, usize)> {
    let mut counts = vec![0usize; k];
    for &v in segment {
        counts[v] += 1;
    }
    let mut dist: Vec<(usize, usize)> = counts
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .collect();
    dist.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    dist
}

/// Cluster chosen for each class block (`assigned[class] = cluster`).
pub fn dominant_clusters(y_pred: &[usize], k: usize, block_size: usize) -> Vec<usize> {
    let distributions: Vec<Vec<(usize, usize)>> = y_pred
        .chunks(block_size)
        .map(|segment| frequency_distribution(segment, k))
        .collect();
    let mut assigned: Vec<Option<usize>> = vec![None; k];
    let mut claimed = vec![false; k];

    // dominant cluster per block, first come first served
    for (class, dist) in distributions.iter().enumerate() {
        if let Some(&(top, _)) = dist.first() {
            if !claimed[top] {
                assigned[class] = Some(top);
                claimed[top] = true;
            }
        }
    }
    // next most frequent unclaimed cluster within the block
    for (class, dist) in distributions.iter().enumerate() {
        if assigned[class].is_none() {
            if let Some(&(cluster, _)) = dist.iter().find(|(c, _)| !claimed[*c]) {
                assigned[class] = Some(cluster);
                claimed[cluster] = true;
            }
        }
    }
    // whatever is left, smallest index first
    for slot in assigned.iter_mut().filter(|s| s.is_none()) {
        let cluster = claimed
            .iter()
            .position(|&c| !c)
            .expect("k slots, k clusters");
        *slot = Some(cluster);
        claimed[cluster] = true;
    }
    assigned.into_iter().map(|c| c.expect("filled")).collect()
}

pub fn align_multiclass(
    y_true: &[usize],
    y_pred: &[usize],
    k: usize,
    block_size: usize,
) -> Result<AlignmentOutcome> {
    if k == 0 || block_size == 0 {
        return Err(Error::InvalidSpec {
            field: "block_size",
            reason: "k and block size must be positive".into(),
        });
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_pred.len() != k * block_size {
        return Err(Error::LengthMismatch {
            left: k * block_size,
            right: y_pred.len(),
        });
    }
    if let Some(&label) = y_true.iter().chain(y_pred).find(|&&v| v >= k) {
        return Err(Error::LabelOutOfRange { label, k });
    }

    let original = accuracy(y_true, y_pred)?;
    let assigned = dominant_clusters(y_pred, k, block_size);
    let mut mapping = vec![0; k];
    for (class, &cluster) in assigned.iter().enumerate() {
        mapping[cluster] = class;
    }
    let remapped: Vec<usize> = y_pred.iter().map(|&c| mapping[c]).collect();
    let remapped_accuracy = accuracy(y_true, &remapped)?;
    Ok(if remapped_accuracy > original {
        AlignmentOutcome {
            labels: remapped,
            accuracy: remapped_accuracy,
            mapping: Some(mapping),
            corrected: true,
        }
    } else {
        AlignmentOutcome {
            labels: y_pred.to_vec(),
            accuracy: original,
            mapping: Some(mapping),
            corrected: false,
        }
    })
}
