//! End-to-end evaluation protocol and the saved train/predict pipeline.
//!
//! Per outer fold: normalize (statistics from the training fold), inject
//! MCAR cells into the training fold, impute it with REM, train the chosen
//! method, then impute the test fold with the frozen Gaussian model and
//! score it.

mod config;
mod pipeline;
mod report;
mod run;

pub use config::{DatasetSpec, ExperimentConfig, Method, Normalization};
pub use pipeline::{train_pipeline, Classifier, Pipeline};
pub use report::{emit_report, render_report, CellReport, Report, ReportFormat, Stat, Summary};
pub use run::{run_experiment, run_experiment_on, run_fold, train_method, FoldOutcome};
