//! Small dense Cholesky routines for covariance blocks.

use ndarray::Array2;

use crate::scalar::Scalar;

/// Lower-triangular `L` with `L Lᵀ = a`, or `None` if `a` is not positive definite.
pub(crate) fn cholesky<T: Scalar>(a: &Array2<T>) -> Option<Array2<T>> {
    let n = a.nrows();
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(s > T::zero()) || !s.is_finite() {
                    return None;
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` in place.
pub(crate) fn cholesky_solve<T: Scalar>(l: &Array2<T>, b: &mut [T]) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * b[k];
        }
        b[i] = s / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[[k, i]] * b[k];
        }
        b[i] = s / l[[i, i]];
    }
}

/// `log det(L Lᵀ)`.
pub(crate) fn log_det<T: Scalar>(l: &Array2<T>) -> T {
    (0..l.nrows()).map(|i| l[[i, i]].ln()).sum::<T>() * T::of(2.0)
}
