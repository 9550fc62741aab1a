//! Weighted averaging of the layers every client shares.

use crate::error::{Error, Result};
use crate::neuralnet::LayerWeights;

/// Interior layers of a client model: everything except the first and last layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonLayerSet {
    pub layers: Vec<LayerWeights>,
}

impl CommonLayerSet {
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(LayerWeights::shape).collect()
    }
}

/// Convex combination `Σ_c (d_c / Σ d) · W_c` of the clients' common layers.
///
/// Accumulated as `W_0 + Σ_c (d_c / Σ d)(W_c − W_0)`, which is the same
/// combination but returns identical inputs (and a single client) unchanged
/// bit for bit.
pub fn aggregate(sets: &[CommonLayerSet], d: &[f64]) -> Result<CommonLayerSet> {
    let reference = sets.first().ok_or(Error::Empty("client layer sets"))?;
    if sets.len() != d.len() {
        return Err(Error::LengthMismatch {
            left: sets.len(),
            right: d.len(),
        });
    }
    if let Some((client, &value)) = d
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v > 0.0 && v.is_finite()))
    {
        return Err(Error::NonPositiveWeight { client, value });
    }
    for (client, set) in sets.iter().enumerate().skip(1) {
        if set.layers.len() != reference.layers.len() {
            return Err(Error::Aggregation {
                client,
                layer: set.layers.len().min(reference.layers.len()),
                reason: format!(
                    "{} common layers, expected {}",
                    set.layers.len(),
                    reference.layers.len()
                ),
            });
        }
        for (layer, (ours, theirs)) in set.layers.iter().zip(&reference.layers).enumerate() {
            if ours.shape() != theirs.shape() || ours.bias.len() != theirs.bias.len() {
                return Err(Error::Aggregation {
                    client,
                    layer,
                    reason: format!("shape {:?} differs from {:?}", ours.shape(), theirs.shape()),
                });
            }
        }
    }

    let total: f64 = d.iter().sum();
    let mut out = reference.clone();
    for (set, &weight) in sets.iter().zip(d).skip(1) {
        let coef = weight / total;
        for (acc, (layer, base)) in out
            .layers
            .iter_mut()
            .zip(set.layers.iter().zip(&reference.layers))
        {
            acc.weight.scaled_add(coef, &(&layer.weight - &base.weight));
            acc.bias.scaled_add(coef, &(&layer.bias - &base.bias));
        }
    }
    Ok(out)
}
