//! Labelled feature matrices with an explicit missing-cell mask.
//!
//! Missing cells hold `NaN` in the feature matrix and `true` in the mask; the
//! two are kept in lock-step by every constructor.

mod folds;
mod io;
mod mcar;
mod normalize;
pub mod synthetic;

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use folds::{stratified_kfold, stratified_kfold_labels, FoldSplit};
pub use io::{load_dataset, write_dense_csv, write_dense_csv_to, write_sparse, Format};
pub use mcar::inject_mcar;
pub use normalize::{apply_normalizer, fit_normalizer, NormStats};

/// Label of the positive (minority) class in binary problems.
pub const POSITIVE: i32 = 1;
/// Label of the negative (majority) class in binary problems.
pub const NEGATIVE: i32 = -1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: Array2<T>,
    missing: Array2<bool>,
    labels: Vec<i32>,
    class_ids: Vec<i32>,
    feature_names: Vec<String>,
    name: String,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset; `NaN` cells in `features` become missing.
    pub fn new(features: Array2<T>, labels: Vec<i32>) -> Result<Self> {
        if labels.len() != features.nrows() {
            return Err(Error::Dimension {
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        let missing = features.mapv(|v| v.is_nan());
        if features.iter().any(|v| v.is_infinite()) {
            return Err(Error::InvalidArgument("infinite feature value".into()));
        }
        let class_ids = distinct_sorted(&labels);
        let feature_names = (1..=features.ncols()).map(|j| format!("x{j}")).collect();
        Ok(Self {
            features,
            missing,
            labels,
            class_ids,
            feature_names,
            name: String::new(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                found: names.len(),
            });
        }
        self.feature_names = names;
        Ok(self)
    }

    /// Same labels and metadata, new feature values (mask re-derived from `NaN`).
    pub fn with_features(&self, features: Array2<T>) -> Result<Self> {
        if features.dim() != self.features.dim() {
            return Err(Error::Dimension {
                expected: self.features.len(),
                found: features.len(),
            });
        }
        let mut out = Self::new(features, self.labels.clone())?;
        out.feature_names = self.feature_names.clone();
        out.name = self.name.clone();
        Ok(out)
    }

    pub fn features(&self) -> &Array2<T> {
        &self.features
    }

    pub fn missing(&self) -> &Array2<bool> {
        &self.missing
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn class_ids(&self) -> &[i32] {
        &self.class_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.features.row(i)
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[[row, col]]
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    /// Rows in the given order, as a new dataset.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let features = self.features.select(Axis(0), rows);
        let missing = self.missing.select(Axis(0), rows);
        let labels: Vec<i32> = rows.iter().map(|&r| self.labels[r]).collect();
        Self {
            class_ids: distinct_sorted(&labels),
            features,
            missing,
            labels,
            feature_names: self.feature_names.clone(),
            name: self.name.clone(),
        }
    }

    /// `(label, count)` pairs in ascending label order.
    pub fn class_counts(&self) -> Vec<(i32, usize)> {
        count_labels(&self.labels, None)
    }

    pub fn is_binary(&self) -> bool {
        self.class_ids == [NEGATIVE, POSITIVE]
    }

    /// The class with fewest rows (lowest id on ties).
    pub fn minority_class(&self) -> Option<i32> {
        self.class_counts()
            .into_iter()
            .min_by_key(|&(label, count)| (count, label))
            .map(|(label, _)| label)
    }

    /// Relabels `class` as +1 and every other class as -1.
    pub fn one_vs_rest(&self, class: i32) -> Self {
        let labels: Vec<i32> = self
            .labels
            .iter()
            .map(|&y| if y == class { POSITIVE } else { NEGATIVE })
            .collect();
        Self {
            class_ids: distinct_sorted(&labels),
            features: self.features.clone(),
            missing: self.missing.clone(),
            labels,
            feature_names: self.feature_names.clone(),
            name: self.name.clone(),
        }
    }

    /// Maps a two-class dataset onto {-1, +1}, making the minority class +1.
    pub fn into_binary(self) -> Result<Self> {
        if self.is_binary() {
            return Ok(self);
        }
        if self.class_ids.len() != 2 {
            return Err(Error::InvalidArgument(format!(
                "expected two classes, found {}",
                self.class_ids.len()
            )));
        }
        let minority = self.minority_class().expect("two classes present");
        Ok(self.one_vs_rest(minority))
    }

    /// Fails with [`Error::MissingValues`] if any cell is missing.
    pub fn require_complete(&self) -> Result<()> {
        if self.has_missing() {
            Err(Error::MissingValues)
        } else {
            Ok(())
        }
    }

    /// Copies the selected rows into one contiguous row-major buffer.
    pub(crate) fn packed_rows(&self, rows: &[usize]) -> Vec<T> {
        let mut out = Vec::with_capacity(rows.len() * self.n_features());
        for &r in rows {
            out.extend(self.features.row(r).iter().copied());
        }
        out
    }
}

pub(crate) fn distinct_sorted(labels: &[i32]) -> Vec<i32> {
    let mut ids = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Per-label counts over `rows` (or all labels), ascending by label.
pub(crate) fn count_labels(labels: &[i32], rows: Option<&[usize]>) -> Vec<(i32, usize)> {
    let mut sorted: Vec<i32> = match rows {
        Some(rows) => rows.iter().map(|&r| labels[r]).collect(),
        None => labels.to_vec(),
    };
    sorted.sort_unstable();
    let mut out: Vec<(i32, usize)> = Vec::new();
    for y in sorted {
        match out.last_mut() {
            Some((label, count)) if *label == y => *count += 1,
            _ => out.push((y, 1)),
        }
    }
    out
}

/// Number of +1 and -1 labels among `rows`.
pub(crate) fn binary_counts(labels: &[i32], rows: &[usize]) -> (usize, usize) {
    rows.iter().fold((0, 0), |(p, n), &r| {
        if labels[r] == POSITIVE {
            (p + 1, n)
        } else {
            (p, n + 1)
        }
    })
}
