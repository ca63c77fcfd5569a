use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{sq_dist, Scalar};

/// `exp(-gamma * ||x - z||^2)`.
pub fn rbf_kernel<T: Scalar>(x: &[T], z: &[T], gamma: T) -> Result<T> {
    if x.len() != z.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            found: z.len(),
        });
    }
    if !(gamma > T::zero()) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    Ok(rbf_unchecked(x, z, gamma))
}

#[inline]
pub(crate) fn rbf_unchecked<T: Scalar>(x: &[T], z: &[T], gamma: T) -> T {
    (-gamma * sq_dist(x, z)).exp()
}

/// Rows above this length are filled in parallel.
const PAR_ROW_LEN: usize = 4096;

/// Least-recently-used cache of RBF kernel rows over a packed point set.
pub(crate) struct KernelCache<'a, T> {
    points: &'a [T],
    dim: usize,
    gamma: T,
    rows: Vec<Option<Vec<T>>>,
    last_used: Vec<u64>,
    clock: u64,
    capacity: usize,
    cached: usize,
}

impl<'a, T: Scalar> KernelCache<'a, T> {
    pub fn new(points: &'a [T], dim: usize, gamma: T, budget_bytes: usize) -> Self {
        let l = if dim == 0 { 0 } else { points.len() / dim };
        let row_bytes = (l * std::mem::size_of::<T>()).max(1);
        let capacity = (budget_bytes / row_bytes).clamp(2, l.max(2));
        Self {
            points,
            dim,
            gamma,
            rows: vec![None; l],
            last_used: vec![0; l],
            clock: 0,
            capacity,
            cached: 0,
        }
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Makes row `i` resident, evicting the stalest other row if needed.
    pub fn ensure(&mut self, i: usize) {
        self.clock += 1;
        self.last_used[i] = self.clock;
        if self.rows[i].is_some() {
            return;
        }
        let buffer = if self.cached >= self.capacity {
            let victim = (0..self.rows.len())
                .filter(|&r| r != i && self.rows[r].is_some())
                .min_by_key(|&r| self.last_used[r])
                .expect("cache holds at least one other row");
            self.rows[victim].take()
        } else {
            self.cached += 1;
            None
        };
        let mut row = buffer.unwrap_or_else(|| vec![T::zero(); self.rows.len()]);
        self.fill(i, &mut row);
        self.rows[i] = Some(row);
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.rows[i].as_deref().expect("row made resident by ensure")
    }

    fn fill(&self, i: usize, out: &mut [T]) {
        let xi = self.point(i);
        let (points, dim, gamma) = (self.points, self.dim, self.gamma);
        let eval = |(t, v): (usize, &mut T)| {
            *v = rbf_unchecked(xi, &points[t * dim..(t + 1) * dim], gamma);
        };
        if out.len() >= PAR_ROW_LEN {
            out.par_iter_mut().enumerate().for_each(eval);
        } else {
            out.iter_mut().enumerate().for_each(eval);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_points() {
        assert_eq!(rbf_kernel(&[0.3, -1.0], &[0.3, -1.0], 2.0).unwrap(), 1.0);
    }

    #[test]
    fn unit_distance() {
        let v = rbf_kernel(&[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);
        let v32 = rbf_kernel(&[0.0f32, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert!((v32 - 0.367_879_4).abs() < 1e-6);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            rbf_kernel(&[0.0], &[0.0, 1.0], 1.0),
            Err(Error::Dimension { .. })
        ));
        assert!(rbf_kernel(&[0.0], &[1.0], 0.0).is_err());
        assert!(rbf_kernel(&[0.0], &[1.0], f64::NAN).is_err());
    }

    #[test]
    fn cache_evicts_and_recomputes() {
        let pts: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        // room for two rows only
        let mut cache = KernelCache::new(&pts, 1, 1.0, 2 * 10 * 8);
        for i in [0, 1, 2, 0, 5, 9, 1] {
            cache.ensure(i);
            let row = cache.row(i);
            for t in 0..10 {
                let expect = rbf_kernel(&pts[i..i + 1], &pts[t..t + 1], 1.0).unwrap();
                assert_eq!(row[t], expect);
            }
        }
        assert_eq!(cache.cached, 2);
        cache.ensure(3);
        cache.ensure(4);
        assert!(cache.rows[3].is_some() && cache.rows[4].is_some());
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(
            x in prop::collection::vec(-5.0f64..5.0, 3),
            z in prop::collection::vec(-5.0f64..5.0, 3),
            g in 0.01f64..10.0,
        ) {
            let a = rbf_kernel(&x, &z, g).unwrap();
            let b = rbf_kernel(&z, &x, g).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a > 0.0 || a == 0.0 && g * crate::scalar::sq_dist(&x, &z) > 700.0);
            prop_assert!(a <= 1.0);
        }
    }
}
