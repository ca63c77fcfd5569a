//! One-against-all reduction: one binary classifier per class.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::dataset::{count_labels, Dataset};
use crate::error::{Error, Result};
use crate::kernel_solver::SvmModel;
use crate::metrics::ConfusionMatrix;
use crate::scalar::Scalar;
use crate::seeds;

const MANIFEST: &str = "manifest.txt";

/// Trains one binary model on a dataset whose labels are {-1, +1}.
pub trait BinaryFit<T: Scalar>: Sync {
    fn fit(&self, data: &Dataset<T>, rows: &[usize], seed: u64) -> Result<SvmModel<T>>;
}

impl<T, F> BinaryFit<T> for F
where
    T: Scalar,
    F: Fn(&Dataset<T>, &[usize], u64) -> Result<SvmModel<T>> + Sync,
{
    fn fit(&self, data: &Dataset<T>, rows: &[usize], seed: u64) -> Result<SvmModel<T>> {
        self(data, rows, seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OvaModel<T> {
    /// Ascending.
    pub class_ids: Vec<i32>,
    /// `per_class[i]` separates `class_ids[i]` (+1) from the rest (-1).
    pub per_class: Vec<SvmModel<T>>,
}

/// Trains one class-versus-rest model per class on `rows` of `data`.
pub fn ova_train<T: Scalar>(
    data: &Dataset<T>,
    rows: &[usize],
    trainer: &dyn BinaryFit<T>,
    seed: u64,
) -> Result<OvaModel<T>> {
    let counts = count_labels(data.labels(), Some(rows));
    if counts.len() < 2 {
        return Err(Error::SingleClass);
    }
    if let Some(&(label, count)) = counts.iter().find(|&&(_, c)| c < 2) {
        return Err(Error::ClassTooSmall {
            label,
            count,
            needed: 2,
        });
    }
    let class_ids: Vec<i32> = counts.iter().map(|&(c, _)| c).collect();
    let per_class = class_ids
        .par_iter()
        .map(|&class| {
            let binary = data.one_vs_rest(class);
            trainer.fit(&binary, rows, seeds::derive(seed, class as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OvaModel { class_ids, per_class })
}

impl<T: Scalar> OvaModel<T> {
    pub fn dim(&self) -> usize {
        self.per_class[0].dim()
    }

    /// Decision value of every per-class model, in class order.
    pub fn decision_values(&self, x: &[T]) -> Result<Vec<T>> {
        self.per_class.iter().map(|m| m.decision_value(x)).collect()
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = String::from("classes");
        for c in &self.class_ids {
            manifest.push_str(&format!(" {c}"));
        }
        manifest.push('\n');
        for (c, m) in self.class_ids.iter().zip(&self.per_class) {
            let name = format!("class_{c}.model");
            m.save(dir.join(&name))?;
            manifest.push_str(&format!("{c} {name}\n"));
        }
        let path = dir.join(MANIFEST);
        fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix("classes"))
            .ok_or_else(|| Error::ModelFormat("manifest must start with `classes`".into()))?;
        let parse = |s: &str| {
            s.parse::<i32>()
                .map_err(|_| Error::ModelFormat(format!("bad class id `{s}`")))
        };
        let class_ids = header.split_whitespace().map(parse).collect::<Result<Vec<_>>>()?;
        let mut per_class = Vec::with_capacity(class_ids.len());
        for &expected in &class_ids {
            let line = lines
                .next()
                .ok_or_else(|| Error::ModelFormat(format!("no model listed for class {expected}")))?;
            let (id, file) = line
                .split_once(' ')
                .ok_or_else(|| Error::ModelFormat(format!("bad manifest line `{line}`")))?;
            if parse(id)? != expected {
                return Err(Error::ModelFormat(format!("manifest lists class {id}, expected {expected}")));
            }
            per_class.push(SvmModel::load(dir.join(file.trim()))?);
        }
        if per_class.is_empty() || per_class.iter().any(|m| m.dim() != per_class[0].dim()) {
            return Err(Error::ModelFormat("per-class models disagree on dimension".into()));
        }
        Ok(Self { class_ids, per_class })
    }
}

/// Class with the largest decision value; ties go to the lower class id.
pub fn ova_predict<T: Scalar>(model: &OvaModel<T>, x: &[T]) -> Result<i32> {
    let values = model.decision_values(x)?;
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    Ok(model.class_ids[best])
}

pub fn ova_predict_rows<T: Scalar>(model: &OvaModel<T>, data: &Dataset<T>, rows: &[usize]) -> Result<Vec<i32>> {
    if data.n_features() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            found: data.n_features(),
        });
    }
    rows.par_iter()
        .map(|&r| {
            let x = data.row(r).to_vec();
            ova_predict(model, &x)
        })
        .collect()
}

/// One-vs-rest confusion matrix for each class in `class_ids`.
pub fn per_class_confusion(predicted: &[i32], actual: &[i32], class_ids: &[i32]) -> Result<Vec<(i32, ConfusionMatrix)>> {
    if predicted.len() != actual.len() {
        return Err(Error::Dimension {
            expected: actual.len(),
            found: predicted.len(),
        });
    }
    Ok(class_ids
        .iter()
        .map(|&c| {
            let mut cm = ConfusionMatrix::default();
            for (&p, &a) in predicted.iter().zip(actual) {
                match (p == c, a == c) {
                    (true, true) => cm.tp += 1,
                    (true, false) => cm.fp += 1,
                    (false, true) => cm.fn_ += 1,
                    (false, false) => cm.tn += 1,
                }
            }
            (c, cm)
        })
        .collect())
}
