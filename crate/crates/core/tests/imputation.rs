use mlsvm::dataset::synthetic::linear_latent;
use mlsvm::dataset::{inject_mcar, Dataset};
use mlsvm::imputation::{regression_coefficients, rem_impute, RemConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian_data(l: usize, n: usize, seed: u64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // correlated features: x = A z
    let a: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut f = Array2::zeros((l, n));
    for r in 0..l {
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..n {
            f[[r, i]] = (0..n).map(|j| a[i * n + j] * z[j]).sum::<f64>() + i as f64;
        }
    }
    Dataset::new(f, vec![1; l]).unwrap()
}

fn rmse(truth: &Dataset<f64>, masked: &Dataset<f64>, completed: &Dataset<f64>) -> f64 {
    let mut ss = 0.0;
    let mut count = 0;
    for r in 0..truth.n_rows() {
        for c in 0..truth.n_features() {
            if masked.is_missing(r, c) {
                ss += (completed.features()[[r, c]] - truth.features()[[r, c]]).powi(2);
                count += 1;
            }
        }
    }
    (ss / count as f64).sqrt()
}

#[test]
fn exact_linear_relation_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x1: Vec<f64> = (0..200).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let mut f = Array2::zeros((200, 2));
    for (r, &v) in x1.iter().enumerate() {
        f[[r, 0]] = v;
        f[[r, 1]] = if r % 10 == 3 { f64::NAN } else { 2.0 * v + 1.0 };
    }
    let data = Dataset::new(f, vec![1; 200]).unwrap();
    assert_eq!(data.missing_count(), 20);
    let config = RemConfig {
        ridge: 1e-6,
        ..RemConfig::default()
    };
    let out = rem_impute(&data, &config).unwrap();
    for r in (3..200).step_by(10) {
        let got = out.completed.features()[[r, 1]];
        assert!((got - (2.0 * x1[r] + 1.0)).abs() < 1e-3, "row {r}: {got}");
    }
}

#[test]
fn independent_features_get_observed_mean() {
    // x1 = +1 and -1 paired with the same x2 value (or both missing), so the
    // sample cross-covariance is zero at the mean start and stays zero
    let l = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut f = Array2::zeros((l, 2));
    for pair in 0..l / 2 {
        let v = if pair % 7 == 0 { f64::NAN } else { 5.0 + rng.sample::<f64, _>(StandardNormal) };
        for (k, x1) in [1.0, -1.0].into_iter().enumerate() {
            f[[2 * pair + k, 0]] = x1;
            f[[2 * pair + k, 1]] = v;
        }
    }
    let data = Dataset::new(f, vec![1; l]).unwrap();
    let observed: Vec<f64> = (0..l)
        .filter(|&r| !data.is_missing(r, 1))
        .map(|r| data.features()[[r, 1]])
        .collect();
    let observed_mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let out = rem_impute(&data, &RemConfig::default()).unwrap();
    for r in (0..l).filter(|&r| data.is_missing(r, 1)) {
        assert!((out.completed.features()[[r, 1]] - observed_mean).abs() < 1e-6);
    }
    let b = regression_coefficients(&ndarray::array![[1.0, 0.0], [0.0, 1.0]], &[0], &[1], 0.0).unwrap();
    assert!(b.iter().all(|v: &f64| v.abs() < 1e-12));
}

#[test]
fn observed_cells_untouched_and_deterministic() {
    for seed in 0..5 {
        let truth = gaussian_data(150, 4, seed);
        let masked = inject_mcar(&truth, 0.15, seed).unwrap();
        let a = rem_impute(&masked, &RemConfig::default()).unwrap();
        let b = rem_impute(&masked, &RemConfig::default()).unwrap();
        assert_eq!(a.completed, b.completed);
        assert!(!a.completed.has_missing());
        for r in 0..150 {
            for c in 0..4 {
                if !masked.is_missing(r, c) {
                    assert_eq!(
                        a.completed.features()[[r, c]].to_bits(),
                        masked.features()[[r, c]].to_bits()
                    );
                }
            }
        }
    }
}

#[test]
fn converges_on_random_gaussian_data() {
    for seed in 0..50 {
        let data = inject_mcar(&gaussian_data(200, 5, 100 + seed), 0.10, seed).unwrap();
        for ridge in [1e-6, 1e-4] {
            let config = RemConfig {
                ridge,
                ..RemConfig::default()
            };
            let out = rem_impute(&data, &config).unwrap();
            assert!(
                out.final_change <= config.rel_tolerance,
                "seed {seed} ridge {ridge}: change {} after {} sweeps",
                out.final_change,
                out.sweeps_used
            );
        }
    }
}

#[test]
fn larger_ridge_shrinks_coefficients() {
    let data = gaussian_data(300, 5, 77);
    let rows: Vec<usize> = (0..300).collect();
    let stats = mlsvm::dataset::fit_normalizer(&data, &rows).unwrap();
    let x = stats.apply(&data).unwrap();
    let l = x.n_rows() as f64;
    let mean: Vec<f64> = (0..5).map(|j| x.features().column(j).sum() / l).collect();
    let mut cov = Array2::zeros((5, 5));
    for i in 0..5 {
        for j in 0..5 {
            cov[[i, j]] = (0..300)
                .map(|r| (x.features()[[r, i]] - mean[i]) * (x.features()[[r, j]] - mean[j]))
                .sum::<f64>()
                / l;
        }
    }
    for missing in [vec![0usize], vec![1, 3], vec![4, 2, 0]] {
        let observed: Vec<usize> = (0..5).filter(|j| !missing.contains(j)).collect();
        let mut last = f64::INFINITY;
        for ridge in [0.0, 1e-4, 1e-2, 1e-1, 1.0, 10.0] {
            let b = regression_coefficients(&cov, &observed, &missing, ridge).unwrap();
            let norm = b.iter().map(|v| v * v).sum::<f64>();
            assert!(norm <= last + 1e-12, "ridge {ridge}: {norm} > {last}");
            last = norm;
        }
    }
}

#[test]
fn loglik_surrogate_monotone_without_ridge() {
    for seed in 0..10 {
        let data = inject_mcar(&gaussian_data(200, 4, 300 + seed), 0.2, seed).unwrap();
        let config = RemConfig {
            ridge: 0.0,
            ..RemConfig::default()
        };
        let out = rem_impute(&data, &config).unwrap();
        for w in out.history.windows(2) {
            let (a, b) = (w[0].penalized_loglik, w[1].penalized_loglik);
            assert!(b >= a - 1e-8 * a.abs().max(1.0), "seed {seed}: {a} -> {b}");
        }
    }
}

#[test]
fn noisy_recovery_within_noise_level() {
    for seed in 0..5 {
        let sigma = 0.1;
        let truth: Dataset<f64> = linear_latent(500, 5, sigma, seed);
        let masked = inject_mcar(&truth, 0.10, seed).unwrap();
        let out = rem_impute(&masked, &RemConfig::default()).unwrap();
        let e = rmse(&truth, &masked, &out.completed);
        assert!(e <= 1.5 * sigma, "seed {seed}: rmse {e}");
    }
}
