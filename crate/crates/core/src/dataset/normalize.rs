use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-feature z-score statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats<T> {
    pub mean: Vec<T>,
    /// Sample standard deviation; exactly zero for constant features.
    pub stdev: Vec<T>,
}

/// Mean and sample stdev of every feature over the observed cells of `rows`.
pub fn fit_normalizer<T: Scalar>(data: &Dataset<T>, rows: &[usize]) -> Result<NormStats<T>> {
    let n = data.n_features();
    let mut mean = Vec::with_capacity(n);
    let mut stdev = Vec::with_capacity(n);
    let mut observed: Vec<T> = Vec::with_capacity(rows.len());
    for j in 0..n {
        observed.clear();
        observed.extend(
            rows.iter()
                .filter(|&&r| !data.is_missing(r, j))
                .map(|&r| data.features()[[r, j]]),
        );
        if observed.is_empty() {
            return Err(Error::AllMissingFeature(j));
        }
        let first = observed[0];
        if observed.iter().all(|&v| v == first) {
            mean.push(first);
            stdev.push(T::zero());
            continue;
        }
        let count = T::of_usize(observed.len());
        let m = observed.iter().copied().sum::<T>() / count;
        let ss: T = observed.iter().map(|&v| (v - m) * (v - m)).sum();
        mean.push(m);
        stdev.push((ss / (count - T::one())).sqrt());
    }
    Ok(NormStats { mean, stdev })
}

pub fn apply_normalizer<T: Scalar>(data: &Dataset<T>, stats: &NormStats<T>) -> Result<Dataset<T>> {
    stats.apply(data)
}

impl<T: Scalar> NormStats<T> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, data: &Dataset<T>) -> Result<()> {
        if data.n_features() != self.dim() || self.stdev.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: data.n_features(),
            });
        }
        Ok(())
    }

    /// `(x - mean) / stdev`; constant features map to 0, missing cells stay missing.
    pub fn apply(&self, data: &Dataset<T>) -> Result<Dataset<T>> {
        self.check(data)?;
        let mut features = data.features().clone();
        for mut row in features.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                if v.is_nan() {
                    continue;
                }
                *v = if self.stdev[j] == T::zero() {
                    T::zero()
                } else {
                    (*v - self.mean[j]) / self.stdev[j]
                };
            }
        }
        data.with_features(features)
    }

    /// Maps normalized values back; constant features return their mean.
    pub fn invert(&self, data: &Dataset<T>) -> Result<Dataset<T>> {
        self.check(data)?;
        let mut features = data.features().clone();
        for mut row in features.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                if !v.is_nan() {
                    *v = *v * self.stdev[j] + self.mean[j];
                }
            }
        }
        data.with_features(features)
    }
}
