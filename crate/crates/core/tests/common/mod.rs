#![allow(dead_code)]

use fedae_core::alignment::accuracy;
use fedae_core::dataprep::SynthSpec;
use fedae_core::federation::{ClientDescriptor, DataSource, ExperimentConfig};
use fedae_core::neuralnet::{mse_loss, AutoencoderModel, AutoencoderSpec, LayerWeights};
use itertools::Itertools;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn synth_client(name: &str, features: usize, k: usize, seed: u64) -> ClientDescriptor {
    let spec = SynthSpec {
        k,
        feature_count: features,
        per_class_count: 200,
        class_mean_separation: 10.0,
        noise_std: 0.2,
        seed,
    };
    ClientDescriptor::new(name, DataSource::Synth(spec), 50)
}

/// Three well-separated synthetic clients with widths 12/10/16 and k = 2/2/3.
pub fn synthetic_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(vec![
        synth_client("alpha", 12, 2, 101),
        synth_client("beta", 10, 2, 202),
        synth_client("gamma", 16, 3, 303),
    ]);
    cfg.rounds = 5;
    cfg.seed = 42;
    cfg.encoder_hidden = vec![32, 16];
    cfg.bottleneck_dim = 4;
    cfg
}

/// Loss evaluated directly from the forward pass; the finite-difference oracle
/// perturbs one parameter at a time through `import_layers`.
pub fn loss_at(model: &AutoencoderModel, batch: &Array2<f64>) -> f64 {
    mse_loss(batch, &model.forward(batch).unwrap()).unwrap()
}

pub fn finite_difference(
    model: &AutoencoderModel,
    batch: &Array2<f64>,
    step: f64,
) -> Vec<LayerWeights> {
    let base = model.export_layers();
    let mut probe = model.clone();
    let mut eval = |layers: Vec<LayerWeights>| {
        probe.import_layers(layers).unwrap();
        loss_at(&probe, batch)
    };
    base.iter()
        .enumerate()
        .map(|(li, layer)| {
            let mut grad = LayerWeights::zeros(layer.fan_in(), layer.fan_out());
            for idx in 0..layer.weight.len() {
                let (r, c) = (idx / layer.fan_out(), idx % layer.fan_out());
                let mut plus = base.clone();
                plus[li].weight[[r, c]] += step;
                let mut minus = base.clone();
                minus[li].weight[[r, c]] -= step;
                grad.weight[[r, c]] = (eval(plus) - eval(minus)) / (2.0 * step);
            }
            for j in 0..layer.bias.len() {
                let mut plus = base.clone();
                plus[li].bias[j] += step;
                let mut minus = base.clone();
                minus[li].bias[j] -= step;
                grad.bias[j] = (eval(plus) - eval(minus)) / (2.0 * step);
            }
            grad
        })
        .collect()
}

/// Small random model (biases randomized too) and batch for gradient checks.
pub fn random_case(seed: u64) -> (AutoencoderModel, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = rng.random_range(2..=5);
    let hidden = rng.random_range(2..=6);
    let bottleneck = rng.random_range(1..=3);
    let spec = AutoencoderSpec::new(input, vec![hidden], bottleneck);
    let mut model = AutoencoderModel::build(spec, seed).unwrap();
    let layers = model
        .export_layers()
        .into_iter()
        .map(|mut l| {
            l.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
            l
        })
        .collect();
    model.import_layers(layers).unwrap();
    let rows = rng.random_range(3..=8);
    let batch = Array2::from_shape_simple_fn((rows, input), || rng.random_range(-1.0..1.0));
    (model, batch)
}

pub fn max_relative_error(a: &[LayerWeights], b: &[LayerWeights]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            x.weight
                .iter()
                .chain(x.bias.iter())
                .zip(y.weight.iter().chain(y.bias.iter()))
                .map(|(p, q)| (p - q).abs() / 1f64.max(p.abs()).max(q.abs()))
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

/// Best accuracy over every bijection cluster -> class (k! candidates).
pub fn brute_force_optimum(y_true: &[usize], y_pred: &[usize], k: usize) -> f64 {
    (0..k)
        .permutations(k)
        .map(|perm| {
            let mapped: Vec<usize> = y_pred.iter().map(|&c| perm[c]).collect();
            accuracy(y_true, &mapped).unwrap()
        })
        .fold(0.0, f64::max)
}

pub fn blocked_truth(k: usize, block: usize) -> Vec<usize> {
    (0..k).flat_map(|c| std::iter::repeat_n(c, block)).collect()
}

pub fn block_modes(pred: &[usize], k: usize, block: usize) -> Vec<usize> {
    pred.chunks(block)
        .map(|chunk| {
            let mut counts = vec![0usize; k];
            for &c in chunk {
                counts[c] += 1;
            }
            (0..k)
                .max_by_key(|&c| (counts[c], std::cmp::Reverse(c)))
                .unwrap()
        })
        .collect()
}

pub fn modes_distinct(pred: &[usize], k: usize, block: usize) -> bool {
    let modes = block_modes(pred, k, block);
    modes.iter().all_unique()
}

/// Blocked truth and a prediction that is a relabelled copy of it with a
/// random fraction (below 0.6) of entries replaced by uniform noise.
pub fn noisy_instance(k: usize, block: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = blocked_truth(k, block);
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(&mut rng);
    let noise: f64 = rng.random_range(0.0..0.6);
    let pred = truth
        .iter()
        .map(|&t| {
            if rng.random::<f64>() < noise {
                rng.random_range(0..k)
            } else {
                perm[t]
            }
        })
        .collect();
    (truth, pred)
}
