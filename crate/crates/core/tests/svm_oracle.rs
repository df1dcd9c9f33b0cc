//! SMO solutions checked against brute-force dual maximisation and KKT conditions.

use ndarray::{Array2, ArrayView2};
use proptest::prelude::*;
use qsvmf::svm::{accuracy, classical_kernel, predict, smo_train, ClassicalKernelSpec, SmoParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dual(k: ArrayView2<'_, f64>, y: &[i8], a: &[f64]) -> f64 {
    let n = a.len();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += a[i] * a[j] * y[i] as f64 * y[j] as f64 * k[[i, j]];
        }
    }
    a.iter().sum::<f64>() - 0.5 * q
}

fn linear_gram(x: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn((x.len(), x.len()), |(i, j)| x[i] * x[j])
}

#[test]
fn dual_matches_grid_search() {
    // four 1-D points, two per class; the equality constraint fixes the last multiplier
    let x = [-2.0, -0.5, 0.7, 1.8];
    let y = [-1i8, -1, 1, 1];
    let c = 1.0;
    let k = linear_gram(&x);
    let steps = 200;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=steps {
        for j in 0..=steps {
            for l in 0..=steps {
                let (a0, a1, a2) = (c * i as f64 / steps as f64, c * j as f64 / steps as f64, c * l as f64 / steps as f64);
                let a3 = a0 + a1 - a2;
                if !(0.0..=c).contains(&a3) {
                    continue;
                }
                best = best.max(dual(k.view(), &y, &[a0, a1, a2, a3]));
            }
        }
    }
    let model = smo_train(k.view(), &y, SmoParams { c, tol: 1e-6, max_passes: 1000 }).unwrap();
    let got = dual(k.view(), &y, &model.alphas);
    assert!(got >= best - 1e-4, "smo dual {got} below grid optimum {best}");
    assert!(got <= best + 0.05, "smo dual {got} far above grid optimum {best}");
    assert!(model.alpha_y_sum().abs() <= 1e-8);
}

#[test]
fn two_point_linear_margin() {
    // x = -1, +1 with linear kernel: alpha = 1/2 each, b = 0, f(x) = x
    let k = linear_gram(&[-1.0, 1.0]);
    let model = smo_train(k.view(), &[-1, 1], SmoParams { c: 10.0, ..SmoParams::default() }).unwrap();
    assert!((model.alphas[0] - 0.5).abs() < 1e-9);
    assert!((model.alphas[1] - 0.5).abs() < 1e-9);
    assert!(model.bias.abs() < 1e-9);
}

fn blob(n: usize, seed: u64) -> (Array2<f64>, Vec<i8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, 2));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label: i8 = if i % 2 == 0 { 1 } else { -1 };
        let centre = 3.0 * label as f64;
        x[[i, 0]] = centre + rng.gen_range(-1.0..1.0);
        x[[i, 1]] = centre + rng.gen_range(-1.0..1.0);
        y.push(label);
    }
    (x, y)
}

#[test]
fn separable_blob_is_fit_exactly() {
    let (x, y) = blob(40, 1);
    for spec in [ClassicalKernelSpec::linear(), ClassicalKernelSpec::rbf()] {
        let spec = spec.resolved(x.view());
        let k = classical_kernel(&spec, x.view(), x.view()).unwrap();
        let params = SmoParams::default();
        let model = smo_train(k.view(), &y, params).unwrap();
        let pred = predict(&model, k.view()).unwrap();
        assert_eq!(accuracy(&pred, &y), 1.0);
        assert!(model.alpha_y_sum().abs() <= 1e-8);
        assert!(model.kkt_residual(k.view()).unwrap() <= params.tol);
        assert!(model.converged);
    }
}

#[test]
fn asymmetric_kernel_is_rejected() {
    let k = ndarray::array![[1.0, 0.2], [0.3, 1.0]];
    assert!(smo_train(k.view(), &[1, -1], SmoParams::default()).is_err());
}

proptest! {
    #[test]
    fn returned_models_satisfy_kkt(seed in any::<u64>(), n in 4usize..30, c in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 3), |_| rng.gen_range(-2.0..2.0));
        let mut y: Vec<i8> = (0..n).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
        y[0] = 1;
        y[1] = -1;
        let spec = ClassicalKernelSpec::rbf().resolved(x.view());
        let k = classical_kernel(&spec, x.view(), x.view()).unwrap();
        let params = SmoParams { c, ..SmoParams::default() };
        let model = smo_train(k.view(), &y, params).unwrap();
        prop_assert!(model.alphas.iter().all(|&a| (0.0..=c).contains(&a)));
        prop_assert!(model.alpha_y_sum().abs() <= 1e-8);
        if model.converged {
            prop_assert!(model.kkt_residual(k.view()).unwrap() <= params.tol);
        }
    }
}
