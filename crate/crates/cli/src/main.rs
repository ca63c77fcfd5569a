use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mlsvm::dataset::{load_dataset, write_dense_csv, write_dense_csv_to, Dataset, Format};
use mlsvm::experiment::{
    render_report, run_experiment, train_pipeline, DatasetSpec, ExperimentConfig, Method, Normalization, Pipeline,
    ReportFormat,
};
use mlsvm::imputation::rem_impute;
use mlsvm::metrics::{accumulate, measures};
use mlsvm::Error;

const CONFIG_ERROR: u8 = 1;
const DATA_ERROR: u8 = 2;
const PARTIAL_FAILURE: u8 = 3;

/// Multilevel weighted SVM for imbalanced data with missing values.
#[derive(Debug, Parser)]
#[command(name = "mlsvm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit normalization, imputation and a classifier on a labelled file and save them.
    Train {
        /// Training data (CSV with a label column, or sparse `label idx:value`).
        data: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Output directory for the saved model.
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a saved model to a file and write one prediction per row.
    Predict {
        /// Directory written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Rows to classify, in the training file's layout.
        data: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Output CSV (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the cross-validated experiment sweep and emit a report table.
    Bench {
        /// Extra datasets in addition to those in the config file.
        data: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
        /// Report file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
    },
    /// Fill missing cells of a CSV with regularized EM.
    Impute {
        data: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Completed CSV (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set multilevel.k=8`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Normalize with statistics of all rows instead of the training fold.
    #[arg(long)]
    paper_normalization: bool,
    /// One or more of svm, wsvm, mlsvm, mlwsvm (comma separated).
    #[arg(long)]
    method: Option<String>,
    /// Missing-value ratios, comma separated.
    #[arg(long)]
    ratios: Option<String>,
    /// Outer cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Name of the label column in CSV input.
    #[arg(long)]
    label_column: Option<String>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        for entry in &self.overrides {
            let (key, value) = entry
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got `{entry}`")))?;
            config.set(key.trim(), value.trim())?;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if self.paper_normalization {
            config.normalization = Normalization::Global;
        }
        if let Some(m) = &self.method {
            config.set("experiment.methods", m)?;
        }
        if let Some(r) = &self.ratios {
            config.set("experiment.ratios", r)?;
        }
        if let Some(f) = self.folds {
            config.outer_folds = f;
        }
        if let Some(j) = self.jobs {
            config.jobs = j;
        }
        if let Some(label) = &self.label_column {
            config.set("experiment.label_column", label)?;
        }
        Ok(config)
    }

    /// The single method for `train`.
    fn method(&self, config: &ExperimentConfig) -> Result<Method, Error> {
        match config.methods[..] {
            [m] => Ok(m),
            _ => Err(Error::Config("train needs exactly one --method".into())),
        }
    }
}

fn format_for(path: &Path, config: &ExperimentConfig) -> Format {
    match Format::from_path(path) {
        Format::Sparse => Format::Sparse,
        Format::DenseCsv { .. } => Format::DenseCsv {
            label_column: config.label_column.clone(),
        },
    }
}

fn load(path: &Path, config: &ExperimentConfig) -> Result<Dataset<f64>, Error> {
    load_dataset(path, &format_for(path, config))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Error::Io {
                path: PathBuf::from("<stdout>"),
                source: e,
            })
        }
    }
}

fn train(data: &Path, common: &Common, out: &Path) -> Result<u8, Error> {
    let mut config = common.config()?;
    if common.method.is_none() && config.methods.len() != 1 {
        config.methods = vec![Method::Mlwsvm];
    }
    let method = common.method(&config)?;
    config.validate_settings()?;
    let dataset = load(data, &config)?;
    let start = std::time::Instant::now();
    let pipeline = train_pipeline(&dataset, method, &config, config.seed)?;
    pipeline.save(out)?;
    let fitted = pipeline.predict(&dataset)?;
    let correct = fitted.iter().zip(dataset.labels()).filter(|(p, a)| p == a).count();
    eprintln!(
        "trained {method} on {} rows ({} features) in {:.1}s; training accuracy {:.4}; saved to {}",
        dataset.n_rows(),
        dataset.n_features(),
        start.elapsed().as_secs_f64(),
        correct as f64 / dataset.n_rows() as f64,
        out.display()
    );
    Ok(0)
}

fn predict(model: &Path, data: &Path, common: &Common, out: Option<&Path>) -> Result<u8, Error> {
    let config = common.config()?;
    let pipeline = Pipeline::load(model)?;
    let dataset = load(data, &config)?;
    let predicted = pipeline.predict(&dataset)?;
    let mut text = String::from("row,prediction\n");
    for (r, p) in predicted.iter().enumerate() {
        text.push_str(&format!("{r},{p}\n"));
    }
    write_output(out, &text)?;
    if dataset.class_ids().len() == 2 {
        let positive = dataset.minority_class().expect("two classes");
        let as_binary = |v: &[i32]| -> Vec<i32> { v.iter().map(|&c| if c == positive { 1 } else { -1 }).collect() };
        if let Ok(m) = accumulate(&as_binary(&predicted), &as_binary(dataset.labels())).and_then(|cm| measures(&cm)) {
            eprintln!("SN {:.4} SP {:.4} G-mean {:.4} ACC {:.4}", m.sn, m.sp, m.gmean, m.acc);
        }
    }
    Ok(0)
}

fn bench(data: &[PathBuf], common: &Common, out: Option<&Path>, format: ReportFormat) -> Result<u8, Error> {
    let mut config = common.config()?;
    for path in data {
        config.datasets.push(DatasetSpec::new(path, &config.label_column));
    }
    let report = run_experiment(&config)?;
    write_output(out, &render_report(&report, format))?;
    if report.has_errors() {
        for cell in report.cells.iter().filter(|c| c.error.is_some()) {
            eprintln!(
                "{} / {} / {}: {}",
                cell.dataset,
                cell.method,
                cell.ratio,
                cell.error.as_deref().unwrap_or_default()
            );
        }
        return Ok(PARTIAL_FAILURE);
    }
    Ok(0)
}

fn impute(data: &Path, common: &Common, out: Option<&Path>) -> Result<u8, Error> {
    let config = common.config()?;
    config.validate_settings()?;
    let dataset = load(data, &config)?;
    let result = rem_impute(&dataset, &config.imputation)?;
    eprintln!(
        "filled {} cells in {} sweeps (last change {:.3e})",
        dataset.missing_count(),
        result.sweeps_used,
        result.final_change
    );
    match out {
        Some(path) => write_dense_csv(&result.completed, path, &config.label_column)?,
        None => {
            let mut text = Vec::new();
            write_dense_csv_to(&result.completed, &mut text, &config.label_column).expect("writing to memory");
            write_output(None, &String::from_utf8(text).expect("CSV is UTF-8"))?;
        }
    }
    Ok(0)
}

fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Config(_) | Error::InvalidArgument(_) => CONFIG_ERROR,
        _ => DATA_ERROR,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { CONFIG_ERROR } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Train { data, common, out } => train(data, common, out),
        Command::Predict {
            model,
            data,
            common,
            out,
        } => predict(model, data, common, out.as_deref()),
        Command::Bench {
            data,
            common,
            out,
            format,
        } => bench(data, common, out.as_deref(), *format),
        Command::Impute { data, common, out } => impute(data, common, out.as_deref()),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
