use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;

use super::{rbf_unchecked, KernelParams, SvmParams};
use crate::dataset::{Dataset, NEGATIVE, POSITIVE};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A trained kernel expansion `f(x) = Σ α_i y_i K(x_i, x) + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel<T> {
    /// Row ids (into the training dataset) of the support vectors.
    pub sv_indices: Vec<usize>,
    /// Signed dual coefficients `α_i y_i`, aligned with `sv_indices`.
    pub alphas: Vec<T>,
    pub bias: T,
    pub params: SvmParams<T>,
    /// Support-vector feature rows, aligned with `sv_indices`.
    pub sv_points: Array2<T>,
    pub converged: bool,
    pub iterations: usize,
    /// Dual objective `eᵀα − ½ αᵀQα` at termination.
    pub dual_objective: T,
}

impl<T: Scalar> SvmModel<T> {
    pub fn n_sv(&self) -> usize {
        self.alphas.len()
    }

    pub fn dim(&self) -> usize {
        self.sv_points.ncols()
    }

    pub fn decision_value(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::MissingValues);
        }
        Ok(self.decision_unchecked(x))
    }

    pub(crate) fn decision_unchecked(&self, x: &[T]) -> T {
        let gamma = self.params.kernel.gamma;
        let dim = self.dim();
        let svs = self.sv_points.as_slice().expect("standard layout");
        self.alphas
            .iter()
            .enumerate()
            .map(|(s, &a)| a * rbf_unchecked(&svs[s * dim..(s + 1) * dim], x, gamma))
            .sum::<T>()
            + self.bias
    }

    /// `sign(f(x))`, with a score of exactly zero going to the majority (-1).
    pub fn predict(&self, x: &[T]) -> Result<i32> {
        self.decision_value(x).map(label_of)
    }

    pub fn decision_rows(&self, data: &Dataset<T>, rows: &[usize]) -> Result<Vec<T>> {
        if data.n_features() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: data.n_features(),
            });
        }
        rows.par_iter()
            .map(|&r| self.decision_value(data.row(r).as_slice().expect("standard layout")))
            .collect()
    }

    pub fn predict_rows(&self, data: &Dataset<T>, rows: &[usize]) -> Result<Vec<i32>> {
        Ok(self.decision_rows(data, rows)?.into_iter().map(label_of).collect())
    }

    /// Largest violation of the KKT conditions over the training `rows`.
    ///
    /// Uses the per-point rule: `y f ≥ 1` at α = 0, `y f ≤ 1` at α = C and
    /// `y f = 1` in between.
    pub fn max_kkt_violation(
        &self,
        data: &Dataset<T>,
        rows: &[usize],
        instance_weights: Option<&[T]>,
    ) -> Result<T> {
        let scores = self.decision_rows(data, rows)?;
        let alpha_of: std::collections::HashMap<usize, T> = self
            .sv_indices
            .iter()
            .zip(&self.alphas)
            .map(|(&i, &a)| (i, a.abs()))
            .collect();
        let mut worst = T::zero();
        for (k, (&r, &f)) in rows.iter().zip(&scores).enumerate() {
            let y = data.labels()[r];
            let yf = if y == POSITIVE { f } else { -f };
            let c = self.params.penalty_for(y) * instance_weights.map_or(T::one(), |w| w[k]);
            let a = alpha_of.get(&r).copied().unwrap_or_else(T::zero);
            let v = if a <= T::zero() {
                (T::one() - yf).max(T::zero())
            } else if a >= c {
                (yf - T::one()).max(T::zero())
            } else {
                (yf - T::one()).abs()
            };
            worst = worst.max(v);
        }
        Ok(worst)
    }

    /// Writes the text model format (17 significant digits per value).
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let fmt = |v: T| format!("{:.16e}", v.as_f64());
        writeln!(w, "gamma {}", fmt(self.params.kernel.gamma))?;
        writeln!(w, "c_pos {}", fmt(self.params.c_pos))?;
        writeln!(w, "c_neg {}", fmt(self.params.c_neg))?;
        writeln!(w, "bias {}", fmt(self.bias))?;
        writeln!(w, "dim {}", self.dim())?;
        writeln!(w, "total_sv {}", self.n_sv())?;
        write!(w, "sv_ids")?;
        for id in &self.sv_indices {
            write!(w, " {id}")?;
        }
        writeln!(w)?;
        for (s, &a) in self.alphas.iter().enumerate() {
            write!(w, "{}", fmt(a))?;
            for (c, &v) in self.sv_points.row(s).iter().enumerate() {
                if v != T::zero() {
                    write!(w, " {}:{}", c + 1, fmt(v))?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::ModelFormat(format!("missing `{key}` line")))?
                .map_err(|e| Error::ModelFormat(e.to_string()))?;
            let rest = line
                .strip_prefix(key)
                .ok_or_else(|| Error::ModelFormat(format!("expected `{key}`, found `{line}`")))?;
            Ok(rest.trim().to_string())
        };
        let real = |s: &str| -> Result<T> {
            s.parse::<f64>()
                .map(T::of)
                .map_err(|_| Error::ModelFormat(format!("bad number `{s}`")))
        };
        let count = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| Error::ModelFormat(format!("bad count `{s}`")))
        };
        let gamma = real(&next("gamma")?)?;
        let c_pos = real(&next("c_pos")?)?;
        let c_neg = real(&next("c_neg")?)?;
        let bias = real(&next("bias")?)?;
        let dim = count(&next("dim")?)?;
        let n_sv = count(&next("total_sv")?)?;
        let sv_indices = next("sv_ids")?
            .split_whitespace()
            .map(count)
            .collect::<Result<Vec<_>>>()?;
        if sv_indices.len() != n_sv {
            return Err(Error::ModelFormat(format!(
                "{} support-vector ids for {n_sv} support vectors",
                sv_indices.len()
            )));
        }
        let mut alphas = Vec::with_capacity(n_sv);
        let mut sv_points = Array2::zeros((n_sv, dim));
        for s in 0..n_sv {
            let line = lines
                .next()
                .ok_or_else(|| Error::ModelFormat(format!("expected {n_sv} support vectors, found {s}")))?
                .map_err(|e| Error::ModelFormat(e.to_string()))?;
            let mut tokens = line.split_whitespace();
            let a = tokens
                .next()
                .ok_or_else(|| Error::ModelFormat("empty support-vector line".into()))?;
            alphas.push(real(a)?);
            for tok in tokens {
                let (idx, val) = tok
                    .split_once(':')
                    .ok_or_else(|| Error::ModelFormat(format!("expected idx:value, got `{tok}`")))?;
                let idx = count(idx)?;
                if idx == 0 || idx > dim {
                    return Err(Error::ModelFormat(format!("feature index {idx} outside 1..={dim}")));
                }
                sv_points[[s, idx - 1]] = real(val)?;
            }
        }
        let mut params = SvmParams::weighted(c_pos, c_neg, gamma);
        params.kernel = KernelParams { gamma };
        params.validate()?;
        Ok(Self {
            sv_indices,
            alphas,
            bias,
            params,
            sv_points,
            converged: true,
            iterations: 0,
            dual_objective: T::nan(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}

pub(crate) fn label_of<T: Scalar>(score: T) -> i32 {
    if score > T::zero() {
        POSITIVE
    } else {
        NEGATIVE
    }
}
