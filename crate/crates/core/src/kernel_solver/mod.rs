//! RBF kernel, class-weighted SMO dual solver and the trained model.

mod kernel;
mod model;
mod smo;

pub use kernel::rbf_kernel;
pub(crate) use kernel::rbf_unchecked;
pub use model::SvmModel;
pub use smo::smo_train;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default stopping bound on the maximal KKT violation.
pub const DEFAULT_TOLERANCE: f64 = 1e-3;
/// Default cap on two-variable updates.
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000_000;
/// Default kernel-row cache budget.
pub const DEFAULT_CACHE_BYTES: usize = 512 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams<T> {
    /// RBF bandwidth: `K(x, z) = exp(-gamma ||x - z||^2)`.
    pub gamma: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams<T> {
    /// Penalty on slack of +1 points.
    pub c_pos: T,
    /// Penalty on slack of -1 points.
    pub c_neg: T,
    pub kernel: KernelParams<T>,
    pub tolerance: T,
    pub max_iterations: usize,
    pub cache_bytes: usize,
}

impl<T: Scalar> SvmParams<T> {
    /// Weighted SVM with separate class penalties.
    pub fn weighted(c_pos: T, c_neg: T, gamma: T) -> Self {
        Self {
            c_pos,
            c_neg,
            kernel: KernelParams { gamma },
            tolerance: T::of(DEFAULT_TOLERANCE),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            cache_bytes: DEFAULT_CACHE_BYTES,
        }
    }

    /// Soft-margin SVM with one penalty for both classes.
    pub fn standard(c: T, gamma: T) -> Self {
        Self::weighted(c, c, gamma)
    }

    pub fn with_tolerance(mut self, tolerance: T) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn gamma(&self) -> T {
        self.kernel.gamma
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        if !positive(self.c_pos) || !positive(self.c_neg) {
            return Err(Error::InvalidArgument(format!(
                "penalties must be positive, got c_pos={} c_neg={}",
                self.c_pos, self.c_neg
            )));
        }
        if !positive(self.kernel.gamma) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be positive, got {}",
                self.kernel.gamma
            )));
        }
        if !positive(self.tolerance) || self.max_iterations == 0 {
            return Err(Error::InvalidArgument("tolerance and max_iterations must be positive".into()));
        }
        Ok(())
    }

    /// Box bound for a point with label `y`.
    pub fn penalty_for(&self, y: i32) -> T {
        if y == crate::dataset::POSITIVE {
            self.c_pos
        } else {
            self.c_neg
        }
    }
}

/// Penalties inversely proportional to class size:
/// `c_pos = base_c * l / (2 n_pos)`, `c_neg = base_c * l / (2 n_neg)`.
pub fn class_weights_from_counts<T: Scalar>(n_pos: usize, n_neg: usize, base_c: T) -> Result<(T, T)> {
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument(format!(
            "class counts must be positive, got n_pos={n_pos} n_neg={n_neg}"
        )));
    }
    if !(base_c > T::zero()) {
        return Err(Error::InvalidArgument(format!("base_c must be positive, got {base_c}")));
    }
    let total = T::of_usize(n_pos + n_neg);
    let two = T::of(2.0);
    Ok((
        base_c * total / (two * T::of_usize(n_pos)),
        base_c * total / (two * T::of_usize(n_neg)),
    ))
}
