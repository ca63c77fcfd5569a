//! Regularized expectation-maximization imputation by iterated regression.
//!
//! Each sweep re-estimates a Gaussian `(μ, Σ)` from the completed matrix and
//! refills every missing cell with its conditional mean given the row's
//! observed cells, `x_m = μ_m + Bᵀ (x_o − μ_o)` with ridge-stabilized
//! coefficients `B = (Σ_oo + ridge·I)⁻¹ Σ_om`.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, log_det};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemConfig<T> {
    /// Ridge weight on the regression coefficients.
    pub ridge: T,
    pub max_sweeps: usize,
    /// Stop once `max |Δx| / (1 + |x|)` over imputed cells is at most this.
    pub rel_tolerance: T,
    /// Floor for the diagonal of `Σ`.
    pub min_variance: T,
}

impl<T: Scalar> Default for RemConfig<T> {
    fn default() -> Self {
        Self {
            ridge: T::of(1e-4),
            max_sweeps: 100,
            rel_tolerance: T::of(1e-4),
            min_variance: T::of(1e-8),
        }
    }
}

impl<T: Scalar> RemConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.ridge >= T::zero()) || !(self.rel_tolerance > T::zero()) || !(self.min_variance > T::zero())
        {
            return Err(Error::InvalidArgument(
                "ridge must be >= 0; rel_tolerance and min_variance > 0".into(),
            ));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidArgument("max_sweeps must be positive".into()));
        }
        Ok(())
    }
}

/// Gaussian parameters `(μ, Σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel<T> {
    pub mean: Vec<T>,
    pub cov: Array2<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord<T> {
    pub sweep: usize,
    pub change: T,
    /// `NaN` when `Σ` was singular at this sweep.
    pub penalized_loglik: f64,
    pub model: GaussianModel<T>,
}

#[derive(Debug, Clone)]
pub struct ImputationResult<T> {
    pub completed: Dataset<T>,
    pub sweeps_used: usize,
    pub final_change: T,
    /// Parameters re-estimated from the final completed matrix.
    pub model: GaussianModel<T>,
    pub history: Vec<SweepRecord<T>>,
}

impl<T: Scalar> ImputationResult<T> {
    /// `sweep,final_change,penalized_loglik` rows for diagnostics.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("sweep,final_change,penalized_loglik\n");
        for rec in &self.history {
            out.push_str(&format!("{},{},{}\n", rec.sweep, rec.change.as_f64(), rec.penalized_loglik));
        }
        out
    }
}

fn check_observed<T: Scalar>(data: &Dataset<T>) -> Result<()> {
    for j in 0..data.n_features() {
        if data.missing().column(j).iter().all(|&m| m) {
            return Err(Error::AllMissingFeature(j));
        }
    }
    Ok(())
}

/// Fills every missing cell with its feature's observed mean.
pub fn mean_initialize<T: Scalar>(data: &Dataset<T>) -> Result<Dataset<T>> {
    check_observed(data)?;
    if !data.has_missing() {
        return Ok(data.clone());
    }
    let mut features = data.features().clone();
    for (j, mut column) in features.axis_iter_mut(Axis(1)).enumerate() {
        let observed: Vec<T> = column.iter().copied().filter(|v| !v.is_nan()).collect();
        let mean = observed.iter().copied().sum::<T>() / T::of_usize(observed.len());
        for v in column.iter_mut().filter(|v| v.is_nan()) {
            *v = mean;
        }
        debug_assert!(!data.missing().column(j).iter().all(|&m| m));
    }
    data.with_features(features)
}

/// Maximum-likelihood mean and covariance (divisor `l`), diagonal floored.
fn estimate<T: Scalar>(x: ArrayView2<T>, min_variance: T) -> GaussianModel<T> {
    let (l, n) = x.dim();
    let count = T::of_usize(l);
    let mean: Vec<T> = (0..n)
        .map(|j| x.column(j).iter().copied().sum::<T>() / count)
        .collect();
    let mut cov = Array2::zeros((n, n));
    for row in x.rows() {
        for a in 0..n {
            let da = row[a] - mean[a];
            for b in a..n {
                cov[[a, b]] += da * (row[b] - mean[b]);
            }
        }
    }
    for a in 0..n {
        for b in a..n {
            let v = cov[[a, b]] / count;
            cov[[a, b]] = v;
            cov[[b, a]] = v;
        }
        if cov[[a, a]] < min_variance {
            cov[[a, a]] = min_variance;
        }
    }
    GaussianModel { mean, cov }
}

/// `(Σ_oo + ridge·I)⁻¹ Σ_om` as an `|o| × |m|` matrix.
pub fn regression_coefficients<T: Scalar>(
    cov: &Array2<T>,
    observed: &[usize],
    missing: &[usize],
    ridge: T,
) -> Result<Array2<T>> {
    let mut s_oo = Array2::zeros((observed.len(), observed.len()));
    for (a, &i) in observed.iter().enumerate() {
        for (b, &j) in observed.iter().enumerate() {
            s_oo[[a, b]] = cov[[i, j]];
        }
        s_oo[[a, a]] += ridge;
    }
    let chol = cholesky(&s_oo).ok_or_else(|| {
        Error::Numerical("observed covariance block is not positive definite".into())
    })?;
    let mut coef = Array2::zeros((observed.len(), missing.len()));
    let mut rhs = vec![T::zero(); observed.len()];
    for (c, &m) in missing.iter().enumerate() {
        for (a, &i) in observed.iter().enumerate() {
            rhs[a] = cov[[i, m]];
        }
        cholesky_solve(&chol, &mut rhs);
        for (a, &v) in rhs.iter().enumerate() {
            coef[[a, c]] = v;
        }
    }
    Ok(coef)
}

/// Rows sharing one missing-cell pattern.
struct PatternGroup {
    observed: Vec<usize>,
    missing: Vec<usize>,
    rows: Vec<usize>,
}

fn pattern_groups(mask: &Array2<bool>) -> Vec<PatternGroup> {
    let mut groups: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
    for (r, row) in mask.rows().into_iter().enumerate() {
        if row.iter().any(|&m| m) {
            groups.entry(row.to_vec()).or_default().push(r);
        }
    }
    groups
        .into_iter()
        .map(|(pattern, rows)| PatternGroup {
            observed: (0..pattern.len()).filter(|&j| !pattern[j]).collect(),
            missing: (0..pattern.len()).filter(|&j| pattern[j]).collect(),
            rows,
        })
        .collect()
}

/// Conditional-mean fills for every group: `(row, column, value)` triples.
fn conditional_fills<T: Scalar>(
    x: &Array2<T>,
    groups: &[PatternGroup],
    model: &GaussianModel<T>,
    ridge: T,
) -> Result<Vec<Vec<(usize, usize, T)>>> {
    groups
        .par_iter()
        .map(|g| {
            let mut fills = Vec::with_capacity(g.rows.len() * g.missing.len());
            if g.observed.is_empty() {
                for &r in &g.rows {
                    for &m in &g.missing {
                        fills.push((r, m, model.mean[m]));
                    }
                }
                return Ok(fills);
            }
            let coef = regression_coefficients(&model.cov, &g.observed, &g.missing, ridge)?;
            for &r in &g.rows {
                for (c, &m) in g.missing.iter().enumerate() {
                    let mut v = model.mean[m];
                    for (a, &o) in g.observed.iter().enumerate() {
                        v += coef[[a, c]] * (x[[r, o]] - model.mean[o]);
                    }
                    fills.push((r, m, v));
                }
            }
            Ok(fills)
        })
        .collect()
}

/// Imputes all missing cells of `data` with the regularized EM.
pub fn rem_impute<T: Scalar>(data: &Dataset<T>, config: &RemConfig<T>) -> Result<ImputationResult<T>> {
    config.validate()?;
    if data.n_rows() < 2 {
        return Err(Error::InvalidArgument("imputation needs at least two rows".into()));
    }
    check_observed(data)?;
    if !data.has_missing() {
        return Ok(ImputationResult {
            completed: data.clone(),
            sweeps_used: 0,
            final_change: T::zero(),
            model: estimate(data.features().view(), config.min_variance),
            history: Vec::new(),
        });
    }

    let groups = pattern_groups(data.missing());
    let mut x = mean_initialize(data)?.features().clone();
    let mut history = Vec::new();
    let mut final_change = T::infinity();
    for sweep in 1..=config.max_sweeps {
        let model = estimate(x.view(), config.min_variance);
        let mut change = T::zero();
        for fills in conditional_fills(&x, &groups, &model, config.ridge)? {
            for (r, c, v) in fills {
                if !v.is_finite() {
                    return Err(Error::Numerical(format!("non-finite imputed value at ({r}, {c})")));
                }
                let rel = (v - x[[r, c]]).abs() / (T::one() + v.abs());
                change = change.max(rel);
                x[[r, c]] = v;
            }
        }
        let loglik = penalized_loglik(x.view(), &model, config.ridge).unwrap_or(f64::NAN);
        log::debug!("REM sweep {sweep}: change {change}, penalized log-likelihood {loglik}");
        history.push(SweepRecord {
            sweep,
            change,
            penalized_loglik: loglik,
            model,
        });
        final_change = change;
        if change <= config.rel_tolerance {
            break;
        }
    }
    let sweeps_used = history.len();
    if final_change > config.rel_tolerance {
        log::warn!("REM did not converge in {sweeps_used} sweeps (last change {final_change})");
    }
    let model = estimate(x.view(), config.min_variance);
    Ok(ImputationResult {
        completed: data.with_features(x)?,
        sweeps_used,
        final_change,
        model,
        history,
    })
}

/// One conditional-mean pass with frozen parameters, for rows that must not
/// influence the estimate (e.g. a test fold).
pub fn impute_with_model<T: Scalar>(
    data: &Dataset<T>,
    model: &GaussianModel<T>,
    ridge: T,
) -> Result<Dataset<T>> {
    if data.n_features() != model.mean.len() {
        return Err(Error::Dimension {
            expected: model.mean.len(),
            found: data.n_features(),
        });
    }
    if !data.has_missing() {
        return Ok(data.clone());
    }
    let groups = pattern_groups(data.missing());
    let mut x = data.features().clone();
    for fills in conditional_fills(&x, &groups, model, ridge)? {
        for (r, c, v) in fills {
            x[[r, c]] = v;
        }
    }
    data.with_features(x)
}

/// Gaussian log-likelihood of the rows of `x` minus `ridge · Σ_j ||β_j||²`,
/// where `β_j` regresses feature `j` on all other features under `Σ`.
pub fn penalized_loglik<T: Scalar>(x: ArrayView2<T>, model: &GaussianModel<T>, ridge: T) -> Result<f64> {
    let n = model.mean.len();
    if x.ncols() != n || model.cov.dim() != (n, n) {
        return Err(Error::Dimension {
            expected: n,
            found: x.ncols(),
        });
    }
    if x.iter().chain(model.cov.iter()).chain(model.mean.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite input to log-likelihood".into()));
    }
    let chol = cholesky(&model.cov)
        .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?;
    let log_det = log_det(&chol).as_f64();
    let norm = n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det;
    let mut total = 0.0;
    let mut centered = vec![T::zero(); n];
    for row in x.rows() {
        for j in 0..n {
            centered[j] = row[j] - model.mean[j];
        }
        let mut solved = centered.clone();
        cholesky_solve(&chol, &mut solved);
        let quad: f64 = centered.iter().zip(&solved).map(|(&a, &b)| (a * b).as_f64()).sum();
        total += -0.5 * (norm + quad);
    }
    let mut penalty = 0.0;
    if ridge > T::zero() && n > 1 {
        for j in 0..n {
            let others: Vec<usize> = (0..n).filter(|&k| k != j).collect();
            let beta = regression_coefficients(&model.cov, &others, &[j], ridge)?;
            penalty += beta.iter().map(|&b| (b * b).as_f64()).sum::<f64>();
        }
    }
    Ok(total - ridge.as_f64() * penalty)
}
