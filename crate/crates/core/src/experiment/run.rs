use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, Method, Normalization};
use super::report::{CellReport, Report, Summary};
use crate::dataset::{fit_normalizer, inject_mcar, load_dataset, stratified_kfold, Dataset};
use crate::error::{Error, Result};
use crate::imputation::{impute_with_model, rem_impute};
use crate::kernel_solver::SvmModel;
use crate::metrics::{accumulate, measures, ConfusionMatrix, Measures};
use crate::model_select::{search_and_fit, SmoTrainer};
use crate::multilevel::{ml_train, MlConfig};
use crate::scalar::Scalar;
use crate::seeds;

/// Trains `method` on `rows` of a complete {-1, +1} dataset. The weighting
/// of `config.search` is overridden by the method.
pub fn train_method<T: Scalar>(
    data: &Dataset<T>,
    rows: &[usize],
    method: Method,
    config: &MlConfig<T>,
    seed: u64,
) -> Result<SvmModel<T>> {
    let mut config = config.clone();
    config.search.weighted = method.weighted();
    if method.multilevel() {
        Ok(ml_train(data, rows, &config, &SmoTrainer, seed)?.final_model)
    } else {
        Ok(search_and_fit(data, rows, &config.search, &SmoTrainer, seed)?.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub confusion: ConfusionMatrix,
    pub measures: Measures,
    /// Wall-clock of the training step alone.
    pub seconds: f64,
}

/// One outer fold of the protocol on a binary dataset.
pub fn run_fold(
    data: &Dataset<f64>,
    train_rows: &[usize],
    test_rows: &[usize],
    method: Method,
    ratio: f64,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<FoldOutcome> {
    let stats = match config.normalization {
        Normalization::TrainFold => fit_normalizer(data, train_rows)?,
        Normalization::Global => fit_normalizer(data, &(0..data.n_rows()).collect::<Vec<_>>())?,
    };
    let train = stats.apply(&data.subset(train_rows))?;
    let train = if ratio > 0.0 {
        inject_mcar(&train, ratio, seeds::derive(seed, 1))?
    } else {
        train
    };
    let imputed = rem_impute(&train, &config.imputation)?;
    log::debug!(
        "fold: {} training rows, {} missing cells imputed in {} sweeps",
        train.n_rows(),
        train.missing_count(),
        imputed.sweeps_used
    );

    let local: Vec<usize> = (0..train.n_rows()).collect();
    let start = Instant::now();
    let model = train_method(&imputed.completed, &local, method, &config.multilevel, seeds::derive(seed, 2))?;
    let seconds = start.elapsed().as_secs_f64();

    let test = stats.apply(&data.subset(test_rows))?;
    let test = impute_with_model(&test, &imputed.model, config.imputation.ridge)?;
    let all: Vec<usize> = (0..test.n_rows()).collect();
    let predicted = model.predict_rows(&test, &all)?;
    let confusion = accumulate(&predicted, test.labels())?;
    Ok(FoldOutcome {
        confusion,
        measures: measures(&confusion)?,
        seconds,
    })
}

/// Loads every configured dataset (minority class as +1) and runs the sweep.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let datasets = config
        .datasets
        .iter()
        .map(|spec| {
            let data: Dataset<f64> = load_dataset(&spec.path, &spec.format)?;
            data.with_name(spec.name()).into_binary()
        })
        .collect::<Result<Vec<_>>>()?;
    run_experiment_on(&datasets, config)
}

struct Job {
    cell: usize,
    seed: u64,
    fold: usize,
}

/// Runs every (dataset, method, ratio) cell over all seeds and outer folds
/// of in-memory binary datasets. Module errors become cell annotations.
pub fn run_experiment_on(datasets: &[Dataset<f64>], config: &ExperimentConfig) -> Result<Report> {
    if datasets.is_empty() {
        return Err(Error::Config("no datasets given".into()));
    }
    let mut cells = Vec::new();
    for (d, data) in datasets.iter().enumerate() {
        for &method in &config.methods {
            for &ratio in &config.missing_ratios {
                cells.push((d, data, method, ratio));
            }
        }
    }

    let seeds = config.seeds();
    let mut splits = Vec::new();
    for data in datasets {
        let per_seed: Vec<_> = seeds
            .iter()
            .map(|&s| stratified_kfold(data, config.outer_folds, s).map_err(|e| e.to_string()))
            .collect();
        splits.push(per_seed);
    }

    let mut jobs = Vec::new();
    for (c, &(d, ..)) in cells.iter().enumerate() {
        for (si, &seed) in seeds.iter().enumerate() {
            if splits[d][si].is_ok() {
                for fold in 0..config.outer_folds {
                    jobs.push(Job { cell: c, seed, fold });
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<std::result::Result<FoldOutcome, String>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let (d, data, method, ratio) = cells[job.cell];
                let si = seeds.iter().position(|&s| s == job.seed).expect("seed listed");
                let split = splits[d][si].as_ref().expect("only valid splits are scheduled");
                let cell_seed = seeds::derive(job.seed, job.fold as u64);
                run_fold(
                    data,
                    &split.train_rows(job.fold),
                    &split.test_rows(job.fold),
                    method,
                    ratio,
                    config,
                    cell_seed,
                )
                .map_err(|e| {
                    log::warn!("{} / {method} / {ratio}: fold {} failed: {e}", data.name(), job.fold);
                    e.to_string()
                })
            })
            .collect()
    });

    let mut per_cell: Vec<Vec<&std::result::Result<FoldOutcome, String>>> = vec![Vec::new(); cells.len()];
    for (job, outcome) in jobs.iter().zip(&outcomes) {
        per_cell[job.cell].push(outcome);
    }
    let rows = cells
        .iter()
        .enumerate()
        .map(|(c, &(d, data, method, ratio))| {
            let split_error = splits[d].iter().find_map(|s| s.as_ref().err().cloned());
            let fold_error = per_cell[c].iter().find_map(|o| o.as_ref().err().cloned());
            let error = split_error.or(fold_error);
            let summary = if error.is_none() {
                let folds: Vec<&FoldOutcome> = per_cell[c].iter().filter_map(|o| o.as_ref().ok()).collect();
                Some(Summary::from_folds(&folds))
            } else {
                None
            };
            CellReport {
                dataset: data.name().to_string(),
                method,
                ratio,
                summary,
                error,
            }
        })
        .collect();
    Ok(Report {
        cells: rows,
        timing: config.timing,
    })
}
