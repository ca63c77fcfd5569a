use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::config::{ExperimentConfig, Method};
use super::run::train_method;
use crate::dataset::{fit_normalizer, Dataset, NormStats};
use crate::error::{Error, Result};
use crate::imputation::{impute_with_model, rem_impute, GaussianModel};
use crate::kernel_solver::SvmModel;
use crate::multiclass::{ova_predict_rows, ova_train, OvaModel};

const HEADER: &str = "mlsvm-pipeline 1";
const PIPELINE_FILE: &str = "pipeline.txt";
const BINARY_FILE: &str = "binary.model";
const OVA_DIR: &str = "ova";

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    /// `model` scores `positive` above zero, `negative` otherwise.
    Binary {
        model: SvmModel<f64>,
        positive: i32,
        negative: i32,
    },
    Ova(OvaModel<f64>),
}

/// Normalizer, imputer and classifier fitted on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub norm: NormStats<f64>,
    pub imputer: GaussianModel<f64>,
    pub ridge: f64,
    pub classifier: Classifier,
}

/// Fits the pipeline on every row. Two classes give a binary model with
/// the minority class positive; more give one-against-all.
pub fn train_pipeline(data: &Dataset<f64>, method: Method, config: &ExperimentConfig, seed: u64) -> Result<Pipeline> {
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    let norm = fit_normalizer(data, &rows)?;
    let imputed = rem_impute(&norm.apply(data)?, &config.imputation)?;
    let completed = imputed.completed;
    let counts = completed.class_counts();
    let classifier = match counts.len() {
        0 | 1 => return Err(Error::SingleClass),
        2 => {
            let positive = completed.minority_class().expect("two classes");
            let negative = counts.iter().map(|&(c, _)| c).find(|&c| c != positive).expect("two classes");
            let binary = completed.one_vs_rest(positive);
            let model = train_method(&binary, &rows, method, &config.multilevel, seed)?;
            Classifier::Binary {
                model,
                positive,
                negative,
            }
        }
        _ => {
            let fit = |d: &Dataset<f64>, r: &[usize], s: u64| train_method(d, r, method, &config.multilevel, s);
            Classifier::Ova(ova_train(&completed, &rows, &fit, seed)?)
        }
    };
    Ok(Pipeline {
        norm,
        imputer: imputed.model,
        ridge: config.imputation.ridge,
        classifier,
    })
}

fn write_reals(out: &mut String, key: &str, values: impl IntoIterator<Item = f64>) {
    out.push_str(key);
    for v in values {
        let _ = write!(out, " {v}");
    }
    out.push('\n');
}

impl Pipeline {
    pub fn dim(&self) -> usize {
        self.norm.dim()
    }

    /// Predicted original labels for every row of `data`.
    pub fn predict(&self, data: &Dataset<f64>) -> Result<Vec<i32>> {
        if data.n_features() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: data.n_features(),
            });
        }
        let x = impute_with_model(&self.norm.apply(data)?, &self.imputer, self.ridge)?;
        let rows: Vec<usize> = (0..x.n_rows()).collect();
        match &self.classifier {
            Classifier::Binary {
                model,
                positive,
                negative,
            } => Ok(model
                .decision_rows(&x, &rows)?
                .into_iter()
                .map(|s| if s > 0.0 { *positive } else { *negative })
                .collect()),
            Classifier::Ova(m) => ova_predict_rows(m, &x, &rows),
        }
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut out = format!("{HEADER}\ndim {}\n", self.dim());
        write_reals(&mut out, "norm_mean", self.norm.mean.iter().copied());
        write_reals(&mut out, "norm_stdev", self.norm.stdev.iter().copied());
        let _ = writeln!(out, "ridge {}", self.ridge);
        write_reals(&mut out, "imputer_mean", self.imputer.mean.iter().copied());
        write_reals(&mut out, "imputer_cov", self.imputer.cov.iter().copied());
        match &self.classifier {
            Classifier::Binary {
                model,
                positive,
                negative,
            } => {
                let _ = writeln!(out, "classifier binary {positive} {negative}");
                model.save(dir.join(BINARY_FILE))?;
            }
            Classifier::Ova(m) => {
                out.push_str("classifier ova\n");
                m.save(dir.join(OVA_DIR))?;
            }
        }
        let path = dir.join(PIPELINE_FILE);
        fs::write(&path, out).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(PIPELINE_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(Error::ModelFormat(format!("{} is not a saved pipeline", path.display())));
        }
        let mut field = |key: &str| -> Result<Vec<String>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::ModelFormat(format!("missing `{key}` line")))?;
            let mut tokens = line.split_whitespace();
            if tokens.next() != Some(key) {
                return Err(Error::ModelFormat(format!("expected `{key}`, found `{line}`")));
            }
            Ok(tokens.map(str::to_string).collect())
        };
        let reals = |tokens: Vec<String>, n: usize| -> Result<Vec<f64>> {
            let v = tokens
                .iter()
                .map(|t| t.parse::<f64>().map_err(|_| Error::ModelFormat(format!("bad number `{t}`"))))
                .collect::<Result<Vec<_>>>()?;
            if v.len() != n {
                return Err(Error::ModelFormat(format!("expected {n} values, found {}", v.len())));
            }
            Ok(v)
        };
        let dim_field = field("dim")?;
        let dim: usize = dim_field
            .first()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::ModelFormat("bad dim".into()))?;
        let mean = reals(field("norm_mean")?, dim)?;
        let stdev = reals(field("norm_stdev")?, dim)?;
        let ridge = reals(field("ridge")?, 1)?[0];
        let imputer_mean = reals(field("imputer_mean")?, dim)?;
        let cov = reals(field("imputer_cov")?, dim * dim)?;
        let cov = Array2::from_shape_vec((dim, dim), cov).expect("length checked");
        let kind = field("classifier")?;
        let label = |t: Option<&String>| -> Result<i32> {
            t.and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::ModelFormat("bad class label".into()))
        };
        let classifier = match kind.first().map(String::as_str) {
            Some("binary") => Classifier::Binary {
                model: SvmModel::load(dir.join(BINARY_FILE))?,
                positive: label(kind.get(1))?,
                negative: label(kind.get(2))?,
            },
            Some("ova") => Classifier::Ova(OvaModel::load(dir.join(OVA_DIR))?),
            _ => return Err(Error::ModelFormat(format!("unknown classifier kind {kind:?}"))),
        };
        Ok(Self {
            norm: NormStats { mean, stdev },
            imputer: GaussianModel {
                mean: imputer_mean,
                cov,
            },
            ridge,
            classifier,
        })
    }
}
