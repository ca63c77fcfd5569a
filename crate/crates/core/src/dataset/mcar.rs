use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Marks `round(ratio * l * n)` observed cells missing, uniformly at random.
///
/// A draw that would remove the last observed feature of a row is rejected
/// and the next draw is taken instead.
pub fn inject_mcar<T: Scalar>(data: &Dataset<T>, ratio: f64, seed: u64) -> Result<Dataset<T>> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::InvalidArgument(format!(
            "missing ratio {ratio} outside [0, 1)"
        )));
    }
    let (l, n) = (data.n_rows(), data.n_features());
    let target = (ratio * (l * n) as f64).round() as usize;
    if target == 0 {
        return Ok(data.clone());
    }

    let mut cells: Vec<(usize, usize)> = (0..l)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .filter(|&(r, c)| !data.is_missing(r, c))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cells.shuffle(&mut rng);

    let mut observed: Vec<usize> = (0..l)
        .map(|r| (0..n).filter(|&c| !data.is_missing(r, c)).count())
        .collect();
    let mut features = data.features().clone();
    let mut removed = 0;
    for (r, c) in cells {
        if removed == target {
            break;
        }
        if observed[r] <= 1 {
            continue;
        }
        observed[r] -= 1;
        features[[r, c]] = T::nan();
        removed += 1;
    }
    if removed < target {
        return Err(Error::InvalidArgument(format!(
            "cannot remove {target} cells without emptying a row (at most {removed})"
        )));
    }
    data.with_features(features)
}
