mod common;

use common::*;
use mlsvm::dataset::synthetic::two_gaussians;
use mlsvm::kernel_solver::{class_weights_from_counts, rbf_kernel, smo_train, SvmParams};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn dual_feasibility_and_kkt() {
    for seed in 0..40 {
        let inst = random_instance(seed, 60, (0.1, 100.0), (0.1, 10.0));
        let (c_pos, c_neg) = (inst.c, inst.c * 0.5);
        let params = SvmParams::weighted(c_pos, c_neg, inst.gamma);
        let model = smo_train(&inst.data, &inst.rows, &params, None).unwrap();
        assert!(model.converged);
        let mut balance = 0.0;
        for (&r, &a) in model.sv_indices.iter().zip(&model.alphas) {
            let y = inst.data.labels()[r] as f64;
            assert!(a * y > 0.0, "sign of alpha_i y_i follows the label");
            assert!(a.abs() <= params.penalty_for(y as i32) * (1.0 + 1e-12));
            balance += a;
        }
        let total_c: f64 = box_bounds(&inst.data, &inst.rows, &params).iter().sum();
        assert!(balance.abs() <= 1e-8 * total_c, "seed {seed}: {balance}");
        let kkt = model.max_kkt_violation(&inst.data, &inst.rows, None).unwrap();
        assert!(kkt <= params.tolerance * (1.0 + 1e-9), "seed {seed}: violation {kkt}");
    }
}

#[test]
fn kernel_matrices_are_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let dim = rng.gen_range(1..5);
        let pts: Vec<Vec<f64>> = (0..8).map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let gamma = rng.gen_range(0.05..5.0);
        let k = Array2::from_shape_fn((8, 8), |(i, j)| rbf_kernel(&pts[i], &pts[j], gamma).unwrap());
        let min = symmetric_eigenvalues(k).into_iter().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-10, "smallest eigenvalue {min}");
    }
}

#[test]
fn symmetric_kernel() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let z: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let g = rng.gen_range(0.01..10.0);
        let (a, b) = (rbf_kernel(&x, &z, g).unwrap(), rbf_kernel(&z, &x, g).unwrap());
        assert_eq!(a, b);
        assert!(a > 0.0 && a <= 1.0);
    }
}

#[test]
fn raising_c_pos_does_not_lose_true_positives() {
    let mut violations = 0;
    let mut total_before = 0;
    let mut total_after = 0;
    for seed in 0..20 {
        let data = two_gaussians::<f64>(20, 120, 2, 1.5, seed);
        let rows: Vec<usize> = (0..140).collect();
        let tp = |c_pos: f64| -> usize {
            let m = smo_train(&data, &rows, &SvmParams::weighted(c_pos, 1.0, 0.5), None).unwrap();
            m.predict_rows(&data, &rows)
                .unwrap()
                .iter()
                .zip(data.labels())
                .filter(|(p, a)| **p == 1 && **a == 1)
                .count()
        };
        let (before, after) = (tp(1.0), tp(6.0));
        if after < before {
            violations += 1;
        }
        total_before += before;
        total_after += after;
    }
    assert!(total_after >= total_before);
    assert!(violations <= 2, "{violations} of 20 instances lost true positives");
}

#[test]
fn inverse_class_size_identity() {
    for (p, n) in [(1usize, 1usize), (50, 150), (7, 993), (300, 20)] {
        let (cp, cn) = class_weights_from_counts(p, n, 2.5f64).unwrap();
        assert!((cp * p as f64 - cn * n as f64).abs() < 1e-9);
    }
}

#[test]
fn single_precision_agrees_with_double() {
    let d64 = two_gaussians::<f64>(30, 50, 3, 2.0, 1);
    let d32 = two_gaussians::<f32>(30, 50, 3, 2.0, 1);
    let rows: Vec<usize> = (0..80).collect();
    let m64 = smo_train(&d64, &rows, &SvmParams::standard(1.0, 0.3), None).unwrap();
    let m32 = smo_train(&d32, &rows, &SvmParams::standard(1.0f32, 0.3), None).unwrap();
    let p64 = m64.predict_rows(&d64, &rows).unwrap();
    let p32 = m32.predict_rows(&d32, &rows).unwrap();
    let agree = p64.iter().zip(&p32).filter(|(a, b)| a == b).count();
    assert!(agree >= 78);
    assert!((m64.dual_objective - m32.dual_objective as f64).abs() < 1e-3 * m64.dual_objective.abs());
}
