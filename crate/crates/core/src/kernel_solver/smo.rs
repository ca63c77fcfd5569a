//! Two-variable SMO on the dual
//!
//!   min ½ αᵀQα − eᵀα   s.t.  yᵀα = 0,  0 ≤ α_i ≤ C_i,   Q_ij = y_i y_j K(x_i, x_j)
//!
//! with second-order working-set selection, shrinking of bounded points and
//! a gap-based stopping rule.

use ndarray::Array2;

use super::kernel::KernelCache;
use super::{SvmModel, SvmParams};
use crate::dataset::{Dataset, NEGATIVE, POSITIVE};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Curvature floor for non-positive-definite pairs.
const TAU: f64 = 1e-12;
/// Iterations between shrinking passes.
const SHRINK_INTERVAL: usize = 1000;

/// Trains a (weighted) SVM on `rows` of `data`.
///
/// The box bound of point `i` is `c_pos` or `c_neg` by label, times
/// `instance_weights[i]` when given (indexed like `rows`). Reaching
/// `max_iterations` is not an error: the model is returned with
/// `converged == false`.
pub fn smo_train<T: Scalar>(
    data: &Dataset<T>,
    rows: &[usize],
    params: &SvmParams<T>,
    instance_weights: Option<&[T]>,
) -> Result<SvmModel<T>> {
    params.validate()?;
    let labels = data.labels();
    let mut has = (false, false);
    for &r in rows {
        match labels[r] {
            POSITIVE => has.0 = true,
            NEGATIVE => has.1 = true,
            other => return Err(Error::Label(other)),
        }
        if data.missing().row(r).iter().any(|&m| m) {
            return Err(Error::MissingValues);
        }
    }
    if !(has.0 && has.1) {
        return Err(Error::SingleClass);
    }
    if let Some(w) = instance_weights {
        if w.len() != rows.len() {
            return Err(Error::Dimension {
                expected: rows.len(),
                found: w.len(),
            });
        }
        if w.iter().any(|&v| !(v > T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidArgument("instance weights must be positive".into()));
        }
    }

    let dim = data.n_features();
    let points = data.packed_rows(rows);
    let y: Vec<T> = rows
        .iter()
        .map(|&r| if labels[r] == POSITIVE { T::one() } else { -T::one() })
        .collect();
    let upper: Vec<T> = rows
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let c = params.penalty_for(labels[r]);
            instance_weights.map_or(c, |w| c * w[k])
        })
        .collect();

    let l = rows.len();
    let mut solver = Solver {
        cache: KernelCache::new(&points, dim, params.gamma(), params.cache_bytes),
        y,
        upper,
        alpha: vec![T::zero(); l],
        grad: vec![-T::one(); l],
        grad_bar: vec![T::zero(); l],
        active: (0..l).collect(),
        unshrunk: false,
    };
    let outcome = solver.run(params.tolerance, params.max_iterations);
    if !outcome.converged {
        log::warn!(
            "SMO stopped after {} iterations with KKT gap {} (tolerance {})",
            outcome.iterations,
            outcome.gap,
            params.tolerance
        );
    }

    let bias = -solver.rho();
    let dual_objective = solver.dual_objective();
    let sv: Vec<usize> = (0..rows.len()).filter(|&k| solver.alpha[k] > T::zero()).collect();
    let mut sv_points = Array2::zeros((sv.len(), dim));
    for (s, &k) in sv.iter().enumerate() {
        sv_points.row_mut(s).assign(&ndarray::ArrayView1::from(solver.cache.point(k)));
    }
    Ok(SvmModel {
        sv_indices: sv.iter().map(|&k| rows[k]).collect(),
        alphas: sv.iter().map(|&k| solver.alpha[k] * solver.y[k]).collect(),
        bias,
        params: *params,
        sv_points,
        converged: outcome.converged,
        iterations: outcome.iterations,
        dual_objective,
    })
}

struct Outcome<T> {
    converged: bool,
    iterations: usize,
    gap: T,
}

struct Solver<'a, T> {
    cache: KernelCache<'a, T>,
    y: Vec<T>,
    upper: Vec<T>,
    alpha: Vec<T>,
    /// Gradient of the dual objective, `Qα − e`. Exact on the active set.
    grad: Vec<T>,
    /// `Σ_{α_j = C_j} C_j Q_tj`, for rebuilding shrunk gradients.
    grad_bar: Vec<T>,
    active: Vec<usize>,
    unshrunk: bool,
}

impl<T: Scalar> Solver<'_, T> {
    fn is_upper(&self, t: usize) -> bool {
        self.alpha[t] >= self.upper[t]
    }

    fn is_lower(&self, t: usize) -> bool {
        self.alpha[t] <= T::zero()
    }

    fn run(&mut self, tolerance: T, max_iterations: usize) -> Outcome<T> {
        let l = self.alpha.len();
        let mut iterations = 0;
        let mut countdown = l.min(SHRINK_INTERVAL);
        loop {
            countdown -= 1;
            if countdown == 0 {
                countdown = l.min(SHRINK_INTERVAL);
                self.shrink(tolerance);
            }
            let (mut pair, mut gap) = self.select_working_set();
            if (pair.is_none() || gap < tolerance) && self.active.len() < l {
                self.unshrink();
                (pair, gap) = self.select_working_set();
                countdown = 1;
            }
            let converged = gap < tolerance;
            match pair {
                Some((i, j)) if !converged && iterations < max_iterations => {
                    self.update_pair(i, j);
                    iterations += 1;
                }
                _ => {
                    self.unshrink();
                    return Outcome {
                        converged: converged || pair.is_none(),
                        iterations,
                        gap,
                    };
                }
            }
        }
    }

    /// `max −y_t G_t` over points that may move up and `max y_t G_t` over
    /// points that may move down, on the active set.
    fn extreme_gradients(&self) -> (T, T) {
        let mut up = T::neg_infinity();
        let mut down = T::neg_infinity();
        for &t in &self.active {
            let g = self.grad[t];
            if self.y[t] > T::zero() {
                if !self.is_upper(t) {
                    up = up.max(-g);
                }
                if !self.is_lower(t) {
                    down = down.max(g);
                }
            } else {
                if !self.is_lower(t) {
                    up = up.max(g);
                }
                if !self.is_upper(t) {
                    down = down.max(-g);
                }
            }
        }
        (up, down)
    }

    fn shrinkable(&self, t: usize, up: T, down: T) -> bool {
        let g = self.grad[t];
        let positive = self.y[t] > T::zero();
        if self.is_upper(t) {
            if positive {
                -g > up
            } else {
                -g > down
            }
        } else if self.is_lower(t) {
            if positive {
                g > down
            } else {
                g > up
            }
        } else {
            false
        }
    }

    fn shrink(&mut self, tolerance: T) {
        let (up, down) = self.extreme_gradients();
        if !self.unshrunk && up + down <= tolerance * T::of(10.0) {
            self.unshrunk = true;
            self.unshrink();
        }
        let mut active = std::mem::take(&mut self.active);
        active.retain(|&t| !self.shrinkable(t, up, down));
        self.active = active;
    }

    /// Rebuilds the gradient of inactive points and reactivates everything.
    fn unshrink(&mut self) {
        let l = self.alpha.len();
        if self.active.len() == l {
            return;
        }
        let mut is_active = vec![false; l];
        for &t in &self.active {
            is_active[t] = true;
        }
        let inactive: Vec<usize> = (0..l).filter(|&t| !is_active[t]).collect();
        for &t in &inactive {
            self.grad[t] = self.grad_bar[t] - T::one();
        }
        for j in 0..l {
            if self.is_lower(j) || self.is_upper(j) {
                continue;
            }
            self.cache.ensure(j);
            let kj = self.cache.row(j);
            let aj = self.alpha[j] * self.y[j];
            for &t in &inactive {
                self.grad[t] += self.y[t] * aj * kj[t];
            }
        }
        self.active = (0..l).collect();
    }

    /// Second-order selection; also returns the current gap `m(α) − M(α)`.
    fn select_working_set(&mut self) -> (Option<(usize, usize)>, T) {
        let mut gmax = T::neg_infinity();
        let mut i = None;
        for &t in &self.active {
            let candidate = if self.y[t] > T::zero() {
                (!self.is_upper(t)).then(|| -self.grad[t])
            } else {
                (!self.is_lower(t)).then(|| self.grad[t])
            };
            if let Some(v) = candidate {
                if v >= gmax {
                    gmax = v;
                    i = Some(t);
                }
            }
        }
        let Some(i) = i else {
            return (None, T::zero());
        };
        self.cache.ensure(i);
        let ki = self.cache.row(i);
        let tau = T::of(TAU);
        let mut gmax2 = T::neg_infinity();
        let mut obj_min = T::infinity();
        let mut j = None;
        for &t in &self.active {
            let (movable, g) = if self.y[t] > T::zero() {
                (!self.is_lower(t), self.grad[t])
            } else {
                (!self.is_upper(t), -self.grad[t])
            };
            if !movable {
                continue;
            }
            if g >= gmax2 {
                gmax2 = g;
            }
            let grad_diff = gmax + g;
            if grad_diff > T::zero() {
                // K_ii = K_tt = 1 for the RBF kernel
                let mut quad = T::of(2.0) - T::of(2.0) * ki[t];
                if quad <= T::zero() {
                    quad = tau;
                }
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= obj_min {
                    obj_min = obj;
                    j = Some(t);
                }
            }
        }
        let gap = gmax + gmax2;
        (j.map(|j| (i, j)), gap)
    }

    fn update_pair(&mut self, i: usize, j: usize) {
        self.cache.ensure(i);
        self.cache.ensure(j);
        let (yi, yj) = (self.y[i], self.y[j]);
        let (ci, cj) = (self.upper[i], self.upper[j]);
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let kij = self.cache.row(i)[j];
        let tau = T::of(TAU);
        let two = T::of(2.0);
        let (mut ai, mut aj) = (old_i, old_j);

        if yi != yj {
            // Q_ij = −K_ij
            let mut quad = two + two * (-kij);
            if quad <= T::zero() {
                quad = tau;
            }
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > T::zero() {
                if aj < T::zero() {
                    aj = T::zero();
                    ai = diff;
                }
            } else if ai < T::zero() {
                ai = T::zero();
                aj = -diff;
            }
            if diff > ci - cj {
                if ai > ci {
                    ai = ci;
                    aj = ci - diff;
                }
            } else if aj > cj {
                aj = cj;
                ai = cj + diff;
            }
        } else {
            let mut quad = two - two * kij;
            if quad <= T::zero() {
                quad = tau;
            }
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > ci {
                if ai > ci {
                    ai = ci;
                    aj = sum - ci;
                }
            } else if aj < T::zero() {
                aj = T::zero();
                ai = sum;
            }
            if sum > cj {
                if aj > cj {
                    aj = cj;
                    ai = sum - cj;
                }
            } else if ai < T::zero() {
                ai = T::zero();
                aj = sum;
            }
        }
        let (was_upper_i, was_upper_j) = (self.is_upper(i), self.is_upper(j));
        self.alpha[i] = ai;
        self.alpha[j] = aj;

        let di = (ai - old_i) * yi;
        let dj = (aj - old_j) * yj;
        let (ki, kj) = (self.cache.row(i), self.cache.row(j));
        for &t in &self.active {
            self.grad[t] += self.y[t] * (ki[t] * di + kj[t] * dj);
        }
        for (k, was_upper) in [(i, was_upper_i), (j, was_upper_j)] {
            if was_upper != self.is_upper(k) {
                let step = if was_upper { -self.upper[k] } else { self.upper[k] } * self.y[k];
                let row = self.cache.row(k);
                for (t, gb) in self.grad_bar.iter_mut().enumerate() {
                    *gb += self.y[t] * step * row[t];
                }
            }
        }
    }

    /// Offset ρ with decision `Σ α_j y_j K(x_j, x) − ρ`: mean of `y_i G_i` over
    /// free points, else the midpoint of the feasible interval.
    fn rho(&self) -> T {
        let mut ub = T::infinity();
        let mut lb = T::neg_infinity();
        let mut sum = T::zero();
        let mut free = 0usize;
        for t in 0..self.alpha.len() {
            let yg = self.y[t] * self.grad[t];
            let positive = self.y[t] > T::zero();
            if self.is_upper(t) {
                if positive {
                    lb = lb.max(yg);
                } else {
                    ub = ub.min(yg);
                }
            } else if self.is_lower(t) {
                if positive {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                sum += yg;
            }
        }
        if free > 0 {
            sum / T::of_usize(free)
        } else {
            (ub + lb) / T::of(2.0)
        }
    }

    /// `eᵀα − ½ αᵀQα = ½ Σ α_i (1 − G_i)`.
    fn dual_objective(&self) -> T {
        let half = T::of(0.5);
        self.alpha
            .iter()
            .zip(&self.grad)
            .map(|(&a, &g)| a * (T::one() - g))
            .sum::<T>()
            * half
    }
}
