use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// On-disk layouts understood by [`load_dataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Format {
    /// Header row, one label column, empty field = missing.
    DenseCsv { label_column: String },
    /// `<label> <idx>:<value> ...` with 1-based indices; absent entries are zeros.
    Sparse,
}

impl Default for Format {
    fn default() -> Self {
        Format::DenseCsv {
            label_column: "label".to_string(),
        }
    }
}

impl Format {
    /// Picks sparse for `.svm`/`.libsvm`/`.txt` extensions, dense CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("svm") | Some("libsvm") | Some("txt") => Format::Sparse,
            _ => Format::default(),
        }
    }
}

pub fn load_dataset<T: Scalar>(path: impl AsRef<Path>, format: &Format) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string();
    let data = match format {
        Format::DenseCsv { label_column } => load_dense(path, label_column)?,
        Format::Sparse => load_sparse(path)?,
    };
    Ok(data.with_name(name))
}

fn parse_label(path: &Path, line: usize, field: &str) -> Result<i32> {
    let field = field.trim();
    let value: f64 = field
        .trim_start_matches('+')
        .parse()
        .map_err(|_| parse_err(path, line, format!("non-numeric label `{field}`")))?;
    if value.fract() != 0.0 || value.abs() > i32::MAX as f64 {
        return Err(parse_err(path, line, format!("label `{field}` is not an integer")));
    }
    Ok(value as i32)
}

fn parse_err(path: &Path, line: usize, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

fn load_dense<T: Scalar>(path: &Path, label_column: &str) -> Result<Dataset<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    if header.is_empty() {
        return Err(Error::Empty(path.display().to_string()));
    }
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| parse_err(path, 1, format!("no `{label_column}` column in header")))?;
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    let n = names.len();

    let mut values: Vec<T> = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(path, line, format!("malformed row: {e}"))
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != n + 1 {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", n + 1, record.len()),
            ));
        }
        for (i, field) in record.iter().enumerate() {
            if i == label_idx {
                labels.push(parse_label(path, line, field)?);
            } else if field.is_empty() {
                values.push(T::nan());
            } else {
                let v: f64 = field.parse().map_err(|_| {
                    parse_err(path, line, format!("non-numeric feature value `{field}`"))
                })?;
                if !v.is_finite() {
                    return Err(parse_err(path, line, format!("non-finite value `{field}`")));
                }
                values.push(T::of(v));
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Empty(path.display().to_string()));
    }
    let features = Array2::from_shape_vec((labels.len(), n), values)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Dataset::new(features, labels)?.with_feature_names(names)
}

fn load_sparse<T: Scalar>(path: &Path) -> Result<Dataset<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0usize;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label = parse_label(path, line_no, tokens.next().expect("non-empty line"))?;
        let mut entries = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(path, line_no, format!("expected idx:value, got `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("bad feature index `{idx}`")))?;
            if idx == 0 {
                return Err(parse_err(path, line_no, "feature indices are 1-based".into()));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("non-numeric feature value `{val}`")))?;
            if !val.is_finite() {
                return Err(parse_err(path, line_no, format!("non-finite value `{val}`")));
            }
            n = n.max(idx);
            entries.push((idx - 1, val));
        }
        labels.push(label);
        rows.push(entries);
    }
    if labels.is_empty() {
        return Err(Error::Empty(path.display().to_string()));
    }
    let mut features = Array2::<T>::zeros((labels.len(), n));
    for (r, entries) in rows.into_iter().enumerate() {
        for (c, v) in entries {
            features[[r, c]] = T::of(v);
        }
    }
    Dataset::new(features, labels)
}

/// Writes `data` as dense CSV with the label in the first column.
///
/// Values are printed with Rust's shortest round-trip representation, so a
/// subsequent [`load_dataset`] reproduces every cell exactly.
pub fn write_dense_csv<T: Scalar>(
    data: &Dataset<T>,
    path: impl AsRef<Path>,
    label_column: &str,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_dense_csv_to(data, &mut w, label_column)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// [`write_dense_csv`] into any writer.
pub fn write_dense_csv_to<T: Scalar>(data: &Dataset<T>, mut w: impl Write, label_column: &str) -> std::io::Result<()> {
    write!(w, "{label_column}")?;
    for name in data.feature_names() {
        write!(w, ",{name}")?;
    }
    writeln!(w)?;
    for (r, &label) in data.labels().iter().enumerate() {
        write!(w, "{label}")?;
        for &v in data.row(r) {
            if v.is_nan() {
                write!(w, ",")?;
            } else {
                write!(w, ",{}", v.as_f64())?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Writes `data` in sparse `label idx:value` form, skipping zeros.
pub fn write_sparse<T: Scalar>(data: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    data.require_complete()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for (r, &label) in data.labels().iter().enumerate() {
        write!(w, "{label}").map_err(io)?;
        for (c, &v) in data.row(r).iter().enumerate() {
            if v != T::zero() {
                write!(w, " {}:{}", c + 1, v.as_f64()).map_err(io)?;
            }
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}
