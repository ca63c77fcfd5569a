//! Independent reference solvers shared by the integration tests.
#![allow(dead_code)]

use mlsvm::dataset::Dataset;
use mlsvm::kernel_solver::{rbf_kernel, SvmModel, SvmParams};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub data: Dataset<f64>,
    pub rows: Vec<usize>,
    pub c: f64,
    pub gamma: f64,
}

/// Random labelled points with both classes present.
pub fn random_instance(seed: u64, max_points: usize, c_range: (f64, f64), gamma_range: (f64, f64)) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = rng.gen_range(2..=max_points);
    let dim = rng.gen_range(1..=4);
    let f = Array2::from_shape_fn((l, dim), |_| rng.gen_range(-1.0..1.0));
    let mut labels: Vec<i32> = (0..l).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
    labels[0] = 1;
    labels[l - 1] = -1;
    let log_c = rng.gen_range(c_range.0.ln()..c_range.1.ln());
    let log_g = rng.gen_range(gamma_range.0.ln()..gamma_range.1.ln());
    Instance {
        data: Dataset::new(f, labels).unwrap(),
        rows: (0..l).collect(),
        c: log_c.exp(),
        gamma: log_g.exp(),
    }
}

/// `Q_ij = y_i y_j K(x_i, x_j)` over `rows`.
pub fn q_matrix(data: &Dataset<f64>, rows: &[usize], gamma: f64) -> Array2<f64> {
    let l = rows.len();
    let y = |i: usize| data.labels()[rows[i]] as f64;
    Array2::from_shape_fn((l, l), |(i, j)| {
        let xi = data.row(rows[i]).to_vec();
        let xj = data.row(rows[j]).to_vec();
        y(i) * y(j) * rbf_kernel(&xi, &xj, gamma).unwrap()
    })
}

/// `eᵀα − ½ αᵀQα`.
pub fn dual_objective(q: &Array2<f64>, alpha: &[f64]) -> f64 {
    let l = alpha.len();
    let mut quad = 0.0;
    for i in 0..l {
        for j in 0..l {
            quad += alpha[i] * q[[i, j]] * alpha[j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto `{0 ≤ α ≤ ub, yᵀα = 0}` by bisection on the
/// multiplier of the equality constraint.
fn project(v: &[f64], y: &[f64], ub: &[f64]) -> Vec<f64> {
    let at = |lambda: f64| -> (Vec<f64>, f64) {
        let a: Vec<f64> = v
            .iter()
            .zip(y)
            .zip(ub)
            .map(|((&vi, &yi), &u)| (vi - lambda * yi).clamp(0.0, u))
            .collect();
        let s = a.iter().zip(y).map(|(ai, yi)| ai * yi).sum();
        (a, s)
    };
    let bound = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + ub.iter().fold(0.0, |a: f64, &b| a.max(b)) + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid).1 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * bound {
            break;
        }
    }
    at(0.5 * (lo + hi)).0
}

/// Accelerated projected gradient on the dual, with restarts.
pub fn qp_oracle(q: &Array2<f64>, y: &[f64], ub: &[f64]) -> Vec<f64> {
    let l = y.len();
    // Lipschitz constant by power iteration (upper-bounded safely)
    let mut v = vec![1.0; l];
    let mut lip = 0.0;
    for _ in 0..200 {
        let w: Vec<f64> = (0..l).map(|i| (0..l).map(|j| q[[i, j]] * v[j]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        lip = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.iter().map(|x| x / norm).collect();
    }
    let step = 1.0 / (lip * 1.01 + 1e-12);
    let grad = |a: &[f64]| -> Vec<f64> { (0..l).map(|i| (0..l).map(|j| q[[i, j]] * a[j]).sum::<f64>() - 1.0).collect() };
    let mut x = vec![0.0; l];
    let mut z = x.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        let g = grad(&z);
        let next = project(&z.iter().zip(&g).map(|(zi, gi)| zi - step * gi).collect::<Vec<_>>(), y, ub);
        let moved: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // restart momentum when the objective would go uphill
        let uphill: f64 = g.iter().zip(next.iter().zip(&x)).map(|(gi, (n, o))| gi * (n - o)).sum();
        let t_next = if uphill > 0.0 { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
        let beta = if uphill > 0.0 { 0.0 } else { (t - 1.0) / t_next };
        z = next.iter().zip(&x).map(|(n, o)| n + beta * (n - o)).collect();
        x = next;
        t = t_next;
        if moved < 1e-15 {
            break;
        }
    }
    x
}

/// Textbook SMO: maximal violating pair, first-order selection, no cache.
pub fn reference_smo(q: &Array2<f64>, y: &[f64], ub: &[f64], tol: f64) -> Vec<f64> {
    let l = y.len();
    let mut alpha = vec![0.0; l];
    let mut g = vec![-1.0; l];
    for _ in 0..10_000_000 {
        let (mut i, mut gmax) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut gmin) = (usize::MAX, f64::INFINITY);
        for t in 0..l {
            let up = (y[t] > 0.0 && alpha[t] < ub[t]) || (y[t] < 0.0 && alpha[t] > 0.0);
            let low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < ub[t]);
            let v = -y[t] * g[t];
            if up && v > gmax {
                gmax = v;
                i = t;
            }
            if low && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            break;
        }
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let curvature = (q[[i, i]] + q[[j, j]] - 2.0 * y[i] * y[j] * q[[i, j]]).max(1e-12);
        if y[i] != y[j] {
            let delta = (-g[i] - g[j]) / curvature;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 && alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = diff;
            } else if diff <= 0.0 && alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ub[i] - ub[j] && alpha[i] > ub[i] {
                alpha[i] = ub[i];
                alpha[j] = ub[i] - diff;
            } else if diff <= ub[i] - ub[j] && alpha[j] > ub[j] {
                alpha[j] = ub[j];
                alpha[i] = ub[j] + diff;
            }
        } else {
            let delta = (g[i] - g[j]) / curvature;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ub[i] && alpha[i] > ub[i] {
                alpha[i] = ub[i];
                alpha[j] = sum - ub[i];
            } else if sum <= ub[i] && alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > ub[j] && alpha[j] > ub[j] {
                alpha[j] = ub[j];
                alpha[i] = sum - ub[j];
            } else if sum <= ub[j] && alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..l {
            g[t] += q[[t, i]] * di + q[[t, j]] * dj;
        }
    }
    alpha
}

/// Unsigned dual variables of `model`, one per entry of `rows`.
pub fn dense_alphas(model: &SvmModel<f64>, rows: &[usize]) -> Vec<f64> {
    rows.iter()
        .map(|r| {
            model
                .sv_indices
                .iter()
                .position(|s| s == r)
                .map(|k| model.alphas[k].abs())
                .unwrap_or(0.0)
        })
        .collect()
}

pub fn box_bounds(data: &Dataset<f64>, rows: &[usize], params: &SvmParams<f64>) -> Vec<f64> {
    rows.iter().map(|&r| params.penalty_for(data.labels()[r])).collect()
}

pub fn signs(data: &Dataset<f64>, rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&r| data.labels()[r] as f64).collect()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(mut a: Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[[i, j]].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                if a[[p, r]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[r, r]] - a[[p, p]]) / (2.0 * a[[p, r]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akr) = (a[[k, p]], a[[k, r]]);
                    a[[k, p]] = c * akp - s * akr;
                    a[[k, r]] = s * akp + c * akr;
                }
                for k in 0..n {
                    let (apk, ark) = (a[[p, k]], a[[r, k]]);
                    a[[p, k]] = c * apk - s * ark;
                    a[[r, k]] = s * apk + c * ark;
                }
            }
        }
    }
    (0..n).map(|i| a[[i, i]]).collect()
}
