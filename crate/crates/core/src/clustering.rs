//! Seeded K-means (k-means++ initialization, Lloyd iterations) over latent codes.

use ndarray::{Array2, ArrayView1};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::Matrix;

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Matrix,
    /// Sum of squared distances from each point to its assigned centroid.
    pub inertia: f64,
    pub iterations_run: usize,
    /// Inertia of every assignment step, first to last.
    pub inertia_trace: Vec<f64>,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Assigns each point to its nearest centroid (lowest index on ties).
/// Returns labels, per-point squared distances and the inertia.
pub fn assign(points: &Matrix, centroids: &Matrix) -> (Vec<usize>, Vec<f64>, f64) {
    let mut labels = Vec::with_capacity(points.nrows());
    let mut dists = Vec::with_capacity(points.nrows());
    for p in points.rows() {
        let (best, d) = centroids
            .rows()
            .into_iter()
            .map(|c| sq_dist(p, c))
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (j, d)| if d < acc.1 { (j, d) } else { acc },
            );
        labels.push(best);
        dists.push(d);
    }
    let inertia = dists.iter().sum();
    (labels, dists, inertia)
}

/// Sum of squared distances for a fixed labelling and centroid set.
pub fn inertia_of(points: &Matrix, centroids: &Matrix, labels: &[usize]) -> f64 {
    points
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, centroids.row(l)))
        .sum()
}

fn kmeans_plus_plus(points: &Matrix, k: usize, rng: &mut impl Rng) -> Matrix {
    let n = points.nrows();
    let mut centroids = Array2::zeros((k, points.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&points.row(first));
    let mut closest: Vec<f64> = points
        .rows()
        .into_iter()
        .map(|p| sq_dist(p, points.row(first)))
        .collect();
    for c in 1..k {
        let total: f64 = closest.iter().sum();
        let chosen = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in closest.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            // every point coincides with an existing centroid
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&points.row(chosen));
        for (i, p) in points.rows().into_iter().enumerate() {
            closest[i] = closest[i].min(sq_dist(p, points.row(chosen)));
        }
    }
    centroids
}

pub fn kmeans_fit(
    points: &Matrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::InvalidSpec {
            field: "k",
            reason: "must be at least 1".into(),
        });
    }
    if points.nrows() < k {
        return Err(Error::TooFewPoints {
            k,
            points: points.nrows(),
        });
    }
    let mut rng = rng_from(seed);
    let mut centroids = kmeans_plus_plus(points, k, &mut rng);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut previous: Option<Vec<usize>> = None;

    while iterations < max_iter {
        let (labels, dists, inertia) = assign(points, &centroids);
        trace.push(inertia);
        iterations += 1;
        if previous.as_ref() == Some(&labels) {
            // centroids are already the means of this assignment
            break;
        }

        let mut sums = Array2::<f64>::zeros(centroids.dim());
        let mut counts = vec![0usize; k];
        for (p, &l) in points.rows().into_iter().zip(&labels) {
            sums.row_mut(l).scaled_add(1.0, &p);
            counts[l] += 1;
        }
        let mut updated = centroids.clone();
        let mut taken = vec![false; points.nrows()];
        for c in 0..k {
            if counts[c] > 0 {
                updated
                    .row_mut(c)
                    .assign(&(&sums.row(c) / counts[c] as f64));
            } else {
                // reseed to the point farthest from its own centroid
                let far = (0..points.nrows())
                    .filter(|&i| !taken[i])
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if dists[b] >= dists[i] => Some(b),
                        _ => Some(i),
                    })
                    .expect("at least k points");
                taken[far] = true;
                updated.row_mut(c).assign(&points.row(far));
            }
        }
        let shift = (&updated - &centroids).mapv(|d| d * d).sum().sqrt();
        centroids = updated;
        if shift < tol {
            break;
        }
        previous = Some(labels);
    }

    let (labels, _, inertia) = assign(points, &centroids);
    trace.push(inertia);
    Ok(KMeansResult {
        labels,
        centroids,
        inertia,
        iterations_run: iterations,
        inertia_trace: trace,
    })
}

/// [`kmeans_fit`] with the default iteration cap and tolerance.
pub fn kmeans(points: &Matrix, k: usize, seed: u64) -> Result<KMeansResult> {
    kmeans_fit(points, k, seed, DEFAULT_MAX_ITER, DEFAULT_TOL)
}
