//! Seeded synthetic generators used by tests, benchmarks and the CLI.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Dataset, NEGATIVE, POSITIVE};
use crate::scalar::Scalar;

/// Two unit-covariance Gaussians whose means are `separation` apart.
pub fn two_gaussians<T: Scalar>(
    n_pos: usize,
    n_neg: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Dataset<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = separation / (2.0 * (dim as f64).sqrt());
    let l = n_pos + n_neg;
    let mut labels: Vec<i32> = (0..l).map(|i| if i < n_pos { POSITIVE } else { NEGATIVE }).collect();
    labels.shuffle(&mut rng);
    let mut features = Array2::zeros((l, dim));
    for (r, &y) in labels.iter().enumerate() {
        let shift = if y == POSITIVE { offset } else { -offset };
        for c in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            features[[r, c]] = T::of(z + shift);
        }
    }
    Dataset::new(features, labels)
        .expect("generated shapes agree")
        .with_name("two_gaussians")
}

/// Many-cluster data in the spirit of one-letter-versus-rest problems.
///
/// `n_clusters` Gaussian blobs with centers drawn uniformly in a cube of side
/// `spread`; cluster 0 is the positive class and receives
/// `round(minority_fraction * l)` points, the rest share the remainder.
pub fn letter_like<T: Scalar>(
    l: usize,
    dim: usize,
    n_clusters: usize,
    minority_fraction: f64,
    spread: f64,
    seed: u64,
) -> Dataset<T> {
    assert!(n_clusters >= 2, "need a minority cluster and at least one other");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..n_clusters)
        .map(|_| (0..dim).map(|_| rng.gen_range(0.0..spread)).collect())
        .collect();
    let n_pos = ((minority_fraction * l as f64).round() as usize).clamp(1, l - 1);
    let mut features = Array2::zeros((l, dim));
    let mut labels = Vec::with_capacity(l);
    for r in 0..l {
        let cluster = if r < n_pos {
            0
        } else {
            1 + (r - n_pos) % (n_clusters - 1)
        };
        labels.push(if cluster == 0 { POSITIVE } else { NEGATIVE });
        for c in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            features[[r, c]] = T::of(centers[cluster][c] + z);
        }
    }
    Dataset::new(features, labels)
        .expect("generated shapes agree")
        .with_name("letter_like")
}

/// Features driven by one latent factor: `x_j = (j + 1) z + j / 2 + noise`.
///
/// Labels are the sign of the latent factor. Returns the dataset, which is
/// complete, so callers can mask cells and compare against it.
pub fn linear_latent<T: Scalar>(l: usize, n: usize, noise: f64, seed: u64) -> Dataset<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Array2::zeros((l, n));
    let mut labels = Vec::with_capacity(l);
    for r in 0..l {
        let z: f64 = rng.sample(StandardNormal);
        labels.push(if z > 0.0 { POSITIVE } else { NEGATIVE });
        for c in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            features[[r, c]] = T::of((c + 1) as f64 * z + c as f64 * 0.5 + noise * e);
        }
    }
    Dataset::new(features, labels)
        .expect("generated shapes agree")
        .with_name("linear_latent")
}

/// Points on both sides of a hyperplane through the origin, with a margin gap.
pub fn separable<T: Scalar>(l: usize, dim: usize, margin: f64, seed: u64) -> Dataset<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Array2::zeros((l, dim));
    let mut labels = Vec::with_capacity(l);
    for r in 0..l {
        let y = if r % 2 == 0 { POSITIVE } else { NEGATIVE };
        labels.push(y);
        let first: f64 = rng.gen_range(margin..margin + 2.0);
        features[[r, 0]] = T::of(if y == POSITIVE { first } else { -first });
        for c in 1..dim {
            features[[r, c]] = T::of(rng.gen_range(-2.0..2.0));
        }
    }
    Dataset::new(features, labels)
        .expect("generated shapes agree")
        .with_name("separable")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_sizes() {
        let d: Dataset<f64> = two_gaussians(30, 70, 3, 2.0, 1);
        assert_eq!(d.class_counts(), vec![(-1, 70), (1, 30)]);
        let d: Dataset<f64> = letter_like(1000, 16, 26, 0.04, 6.0, 1);
        assert_eq!(d.class_counts(), vec![(-1, 960), (1, 40)]);
    }

    #[test]
    fn seeded() {
        let a: Dataset<f32> = linear_latent(20, 3, 0.1, 4);
        let b: Dataset<f32> = linear_latent(20, 3, 0.1, 4);
        assert_eq!(a, b);
    }
}
