use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::config::Method;
use super::run::FoldOutcome;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(Error::Config(format!("unknown report format `{s}` (csv, markdown)"))),
        }
    }
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self { mean: f64::NAN, sd: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

/// Per-fold measures averaged over folds and seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub sn: Stat,
    pub sp: Stat,
    pub gmean: Stat,
    pub acc: Stat,
    pub seconds: Stat,
    pub runs: usize,
}

impl Summary {
    pub(super) fn from_folds(folds: &[&FoldOutcome]) -> Self {
        let pick = |f: fn(&FoldOutcome) -> f64| Stat::of(&folds.iter().map(|o| f(o)).collect::<Vec<_>>());
        Self {
            sn: pick(|o| o.measures.sn),
            sp: pick(|o| o.measures.sp),
            gmean: pick(|o| o.measures.gmean),
            acc: pick(|o| o.measures.acc),
            seconds: pick(|o| o.seconds),
            runs: folds.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub dataset: String,
    pub method: Method,
    pub ratio: f64,
    pub summary: Option<Summary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// Dataset-major, then method, then ratio, in configuration order.
    pub cells: Vec<CellReport>,
    pub timing: bool,
}

impl Report {
    pub fn has_errors(&self) -> bool {
        self.cells.iter().any(|c| c.error.is_some())
    }

    pub fn cell(&self, dataset: &str, method: Method, ratio: f64) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && c.method == method && c.ratio == ratio)
    }
}

const MEASURE_COLUMNS: [&str; 5] = ["sn", "sp", "gmean", "acc", "seconds"];

fn stats_of(s: &Summary) -> [Stat; 5] {
    [s.sn, s.sp, s.gmean, s.acc, s.seconds]
}

fn one_line(text: &str) -> String {
    text.replace(['\n', '\r'], " ").replace([',', '|'], ";")
}

/// Renders the report; measures at 4 decimals, seconds at 1.
pub fn render_report(report: &Report, format: ReportFormat) -> String {
    let mut out = String::new();
    let decimals = |i: usize| if i == 4 { 1 } else { 4 };
    match format {
        ReportFormat::Csv => {
            out.push_str("dataset,method,ratio");
            for c in MEASURE_COLUMNS {
                let _ = write!(out, ",{c},{c}_sd");
            }
            out.push_str(",runs,error\n");
            for cell in &report.cells {
                let _ = write!(out, "{},{},{}", one_line(&cell.dataset), cell.method, cell.ratio);
                match &cell.summary {
                    Some(s) => {
                        for (i, st) in stats_of(s).iter().enumerate() {
                            if i == 4 && !report.timing {
                                out.push_str(",,");
                            } else {
                                let p = decimals(i);
                                let _ = write!(out, ",{:.p$},{:.p$}", st.mean, st.sd);
                            }
                        }
                        let _ = write!(out, ",{}", s.runs);
                    }
                    None => out.push_str(&",".repeat(MEASURE_COLUMNS.len() * 2 + 1)),
                }
                let _ = writeln!(out, ",{}", cell.error.as_deref().map(one_line).unwrap_or_default());
            }
        }
        ReportFormat::Markdown => {
            out.push_str("| Dataset | Method | Ratio | SN | SP | G-mean | ACC | Seconds | Runs | Error |\n");
            out.push_str("|---|---|---:|---:|---:|---:|---:|---:|---:|---|\n");
            for cell in &report.cells {
                let _ = write!(out, "| {} | {} | {} |", one_line(&cell.dataset), cell.method, cell.ratio);
                match &cell.summary {
                    Some(s) => {
                        for (i, st) in stats_of(s).iter().enumerate() {
                            if i == 4 && !report.timing {
                                out.push_str("  |");
                            } else {
                                let p = decimals(i);
                                let _ = write!(out, " {:.p$} ± {:.p$} |", st.mean, st.sd);
                            }
                        }
                        let _ = write!(out, " {} |", s.runs);
                    }
                    None => out.push_str(&"  |".repeat(MEASURE_COLUMNS.len() + 1)),
                }
                let _ = writeln!(out, " {} |", cell.error.as_deref().map(one_line).unwrap_or_default());
            }
        }
    }
    out
}

pub fn emit_report(report: &Report, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    if report.cells.is_empty() {
        return Err(Error::Empty("report has no rows".into()));
    }
    let path = path.as_ref();
    std::fs::write(path, render_report(report, format)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let st = |m: f64| Stat { mean: m, sd: 0.01 };
        Report {
            cells: vec![CellReport {
                dataset: "toy".into(),
                method: Method::Mlwsvm,
                ratio: 0.05,
                summary: Some(Summary {
                    sn: st(0.975),
                    sp: st(0.6583),
                    gmean: st(0.8012),
                    acc: st(0.9),
                    seconds: st(2.04),
                    runs: 30,
                }),
                error: None,
            }],
            timing: true,
        }
    }

    #[test]
    fn csv_layout() {
        let text = render_report(&sample(), ReportFormat::Csv);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0],
            "dataset,method,ratio,sn,sn_sd,sp,sp_sd,gmean,gmean_sd,acc,acc_sd,seconds,seconds_sd,runs,error"
        );
        assert_eq!(
            lines[1],
            "toy,mlwsvm,0.05,0.9750,0.0100,0.6583,0.0100,0.8012,0.0100,0.9000,0.0100,2.0,0.0,30,"
        );
    }

    #[test]
    fn markdown_and_errors() {
        let mut r = sample();
        r.cells.push(CellReport {
            dataset: "bad".into(),
            method: Method::Svm,
            ratio: 0.4,
            summary: None,
            error: Some("class 1 has 3 members, at least 10 required".into()),
        });
        let md = render_report(&r, ReportFormat::Markdown);
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("|---"));
        assert!(lines.iter().all(|l| l.starts_with('|') && l.ends_with('|')));
        let cols = |l: &str| l.matches('|').count();
        assert!(lines.iter().all(|l| cols(l) == cols(lines[0])));
        let csv = render_report(&r, ReportFormat::Csv);
        assert!(csv.lines().all(|l| l.matches(',').count() == 14));
        assert!(r.has_errors());
    }

    #[test]
    fn emit_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        emit_report(&sample(), &a, ReportFormat::Csv).unwrap();
        emit_report(&sample(), &b, ReportFormat::Csv).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
        assert!(emit_report(&sample(), dir.path().join("no/such/dir.csv"), ReportFormat::Csv).is_err());
    }
}
