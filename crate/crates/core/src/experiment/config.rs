use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dataset::Format;
use crate::error::{Error, Result};
use crate::imputation::RemConfig;
use crate::knn_graph::KnnMode;
use crate::model_select::Range;
use crate::multilevel::MlConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Svm,
    Wsvm,
    Mlsvm,
    Mlwsvm,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Svm, Method::Wsvm, Method::Mlsvm, Method::Mlwsvm];

    pub fn weighted(self) -> bool {
        matches!(self, Method::Wsvm | Method::Mlwsvm)
    }

    pub fn multilevel(self) -> bool {
        matches!(self, Method::Mlsvm | Method::Mlwsvm)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Svm => "svm",
            Method::Wsvm => "wsvm",
            Method::Mlsvm => "mlsvm",
            Method::Mlwsvm => "mlwsvm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown method `{s}` (svm, wsvm, mlsvm, mlwsvm)")))
    }
}

/// Where normalization statistics come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Training fold only.
    #[default]
    TrainFold,
    /// Every row of the dataset, test folds included.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub format: Format,
}

impl DatasetSpec {
    pub fn new(path: impl Into<PathBuf>, label_column: &str) -> Self {
        let path = path.into();
        let format = match Format::from_path(&path) {
            Format::DenseCsv { .. } => Format::DenseCsv {
                label_column: label_column.to_string(),
            },
            sparse => sparse,
        };
        Self { path, format }
    }

    pub fn name(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.path.display().to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSpec>,
    pub label_column: String,
    pub methods: Vec<Method>,
    pub missing_ratios: Vec<f64>,
    pub outer_folds: usize,
    /// Runs use seeds `seed, seed + 1, ..., seed + repeats - 1`.
    pub seed: u64,
    pub repeats: usize,
    pub normalization: Normalization,
    /// Report wall-clock seconds; off makes reports byte-reproducible.
    pub timing: bool,
    /// Worker threads; 0 picks the rayon default.
    pub jobs: usize,
    pub multilevel: MlConfig<f64>,
    pub imputation: RemConfig<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            label_column: "label".into(),
            methods: vec![Method::Mlwsvm],
            missing_ratios: vec![0.05, 0.10, 0.20, 0.40],
            outer_folds: 10,
            seed: 1,
            repeats: 3,
            normalization: Normalization::TrainFold,
            timing: true,
            jobs: 0,
            multilevel: MlConfig::new(true),
            imputation: RemConfig::default(),
        }
    }
}

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_list<V: FromStr>(key: &str, value: &str) -> Result<Vec<V>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl ExperimentConfig {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repeats as u64).map(|i| self.seed + i).collect()
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = Self::default();
        config.apply_text(text)?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::default();
        config.apply_text(&text)?;
        // relative dataset paths are relative to the config file
        if let Some(dir) = path.parent() {
            for spec in &mut config.datasets {
                if spec.path.is_relative() {
                    spec.path = dir.join(&spec.path);
                }
            }
        }
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    /// Sets one option by its dotted key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let ml = &mut self.multilevel;
        match key {
            "experiment.datasets" | "experiment.dataset" => {
                self.datasets.extend(
                    value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|p| DatasetSpec::new(p, &self.label_column)),
                );
            }
            "experiment.label_column" => {
                self.label_column = value.to_string();
                for spec in &mut self.datasets {
                    *spec = DatasetSpec::new(spec.path.clone(), value);
                }
            }
            "experiment.methods" | "experiment.method" => self.methods = parse_list(key, value)?,
            "experiment.ratios" => self.missing_ratios = parse_list(key, value)?,
            "experiment.folds" => self.outer_folds = parse(key, value)?,
            "experiment.seed" => self.seed = parse(key, value)?,
            "experiment.repeats" => self.repeats = parse(key, value)?,
            "experiment.normalization" => {
                self.normalization = match value {
                    "train" | "fold" => Normalization::TrainFold,
                    "global" | "paper" => Normalization::Global,
                    _ => return Err(Error::Config(format!("bad normalization `{value}` (train, global)"))),
                }
            }
            "experiment.timing" => self.timing = parse(key, value)?,
            "experiment.jobs" => self.jobs = parse(key, value)?,
            "multilevel.k" => ml.k = parse(key, value)?,
            "multilevel.knn_mode" => {
                ml.knn_mode = match value {
                    "exact" => KnnMode::Exact,
                    "approximate" => KnnMode::Approximate,
                    "auto" => KnnMode::Auto,
                    _ => return Err(Error::Config(format!("bad knn mode `{value}`"))),
                }
            }
            "multilevel.ratio_floor" => ml.ratio_floor = parse(key, value)?,
            "multilevel.coarsest_size_target" => ml.coarsest_size_target = parse(key, value)?,
            "multilevel.minority_floor" => ml.minority_floor = parse(key, value)?,
            "multilevel.refine_neighbors" => ml.refine_neighbors = parse(key, value)?,
            "multilevel.partition_cap" => ml.partition_cap = parse(key, value)?,
            "multilevel.search_cap" => ml.search_cap = parse(key, value)?,
            "multilevel.guard_refinement" => ml.guard_refinement = parse(key, value)?,
            "search.folds" => ml.search.folds = parse(key, value)?,
            "search.log2_c" => ml.search.bounds.log2_c = parse_range(key, value)?,
            "search.log2_gamma" => ml.search.bounds.log2_gamma = parse_range(key, value)?,
            "solver.tolerance" => ml.search.template.tolerance = parse(key, value)?,
            "solver.max_iterations" => ml.search.template.max_iterations = parse(key, value)?,
            "solver.cache_mb" => ml.search.template.cache_bytes = parse::<usize>(key, value)? << 20,
            "imputation.ridge" => self.imputation.ridge = parse(key, value)?,
            "imputation.max_sweeps" => self.imputation.max_sweeps = parse(key, value)?,
            "imputation.rel_tolerance" => self.imputation.rel_tolerance = parse(key, value)?,
            "imputation.min_variance" => self.imputation.min_variance = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Config("no datasets given".into()));
        }
        self.validate_settings()
    }

    /// Everything [`validate`](Self::validate) checks except the dataset list.
    pub fn validate_settings(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no methods given".into()));
        }
        if self.missing_ratios.is_empty() {
            return Err(Error::Config("no missing ratios given".into()));
        }
        if let Some(r) = self.missing_ratios.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(Error::Config(format!("missing ratio {r} outside [0, 1)")));
        }
        if self.outer_folds < 2 {
            return Err(Error::Config(format!("folds = {}, need at least 2", self.outer_folds)));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be positive".into()));
        }
        self.multilevel
            .validate()
            .and_then(|_| self.multilevel.search.template.validate())
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.multilevel.search.folds < 2 {
            return Err(Error::Config("search.folds must be at least 2".into()));
        }
        self.imputation.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

fn parse_range(key: &str, value: &str) -> Result<Range> {
    let bounds: Vec<f64> = parse_list(key, value)?;
    match bounds[..] {
        [lo, hi] if lo < hi => Ok(Range::new(lo, hi)),
        _ => Err(Error::Config(format!("`{key}` needs `lo,hi` with lo < hi, got `{value}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let c = ExperimentConfig::from_text(
            "# sweep\nexperiment.datasets = a.csv, b.svm\nexperiment.methods=svm,MLWSVM\n\
             experiment.ratios=0,0.2\nmultilevel.minority_floor=300 # default\nsearch.log2_c=-1,3\n",
        )
        .unwrap();
        assert_eq!(c.datasets.len(), 2);
        assert_eq!(c.datasets[1].format, Format::Sparse);
        assert_eq!(c.methods, vec![Method::Svm, Method::Mlwsvm]);
        assert_eq!(c.missing_ratios, vec![0.0, 0.2]);
        assert_eq!(c.multilevel.search.bounds.log2_c, Range::new(-1.0, 3.0));
        assert_eq!(c.seeds(), vec![1, 2, 3]);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::from_text("nonsense").is_err());
        assert!(ExperimentConfig::from_text("experiment.bogus=1").is_err());
        assert!(ExperimentConfig::from_text("experiment.methods=knn").is_err());
        assert!(ExperimentConfig::from_text("search.log2_c=3,1").is_err());
        let mut c = ExperimentConfig::from_text("experiment.datasets=a.csv\nexperiment.ratios=1.0").unwrap();
        assert!(c.validate().is_err());
        c.missing_ratios = vec![0.1];
        c.validate().unwrap();
        c.datasets.clear();
        assert!(c.validate().is_err());
    }
}
