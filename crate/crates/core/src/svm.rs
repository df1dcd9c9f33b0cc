//! Soft-margin SVM trained on precomputed kernels by sequential minimal
//! optimisation of the dual
//!
//! ```text
//! max  sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij
//! s.t. sum_i a_i y_i = 0,  0 <= a_i <= C
//! ```
//!
//! Working pairs are chosen as the maximal KKT violators, scanned in index
//! order so the solver is fully deterministic.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multipliers at or below this value are treated as zero.
pub const SUPPORT_EPS: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-9;
const MIN_CURVATURE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoParams {
    pub c: f64,
    pub tol: f64,
    /// Iteration budget in units of full sweeps (`max_passes * n` pair updates).
    pub max_passes: usize,
}

impl Default for SmoParams {
    fn default() -> Self {
        Self { c: 1.0, tol: 1e-3, max_passes: 200 }
    }
}

/// Trained dual model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub support: Vec<usize>,
    #[serde(skip)]
    pub labels: Vec<i8>,
    pub c: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn sign(y: i8) -> f64 {
    if y > 0 {
        1.0
    } else {
        -1.0
    }
}

/// Train on an `n x n` kernel.
///
/// Returns the last iterate with `converged = false` when the budget runs out.
pub fn smo_train(k: ArrayView2<'_, f64>, y: &[i8], params: SmoParams) -> Result<SvmModel> {
    let n = y.len();
    if k.dim() != (n, n) {
        return Err(Error::shape(format!("{n}x{n} kernel"), format!("{}x{}", k.nrows(), k.ncols())));
    }
    if n == 0 {
        return Err(Error::invalid("cannot train on zero samples"));
    }
    if !(params.c > 0.0) || !(params.tol > 0.0) {
        return Err(Error::invalid("C and tol must be positive"));
    }
    if y.iter().any(|&l| l != 1 && l != -1) {
        return Err(Error::invalid("labels must be +1 or -1"));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (k[[i, j]] - k[[j, i]]).abs() > SYMMETRY_TOL {
                return Err(Error::invalid(format!("kernel is not symmetric at ({i}, {j})")));
            }
        }
    }

    let c = params.c;
    let ys: Vec<f64> = y.iter().map(|&l| sign(l)).collect();
    let mut alpha = vec![0.0; n];
    // err[i] = sum_j a_j y_j K_ij - y_i, i.e. the decision value minus the label without bias
    let mut err: Vec<f64> = ys.iter().map(|v| -v).collect();

    let budget = params.max_passes.saturating_mul(n).max(1);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < budget {
        let (up, low) = violating_pair(&alpha, &ys, &err, c);
        let (Some(i), Some(j)) = (up, low) else {
            converged = true;
            break;
        };
        if err[i] - err[j] <= params.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (yi, yj) = (ys[i], ys[j]);
        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let (lo, hi) = if yi != yj {
            ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
        } else {
            ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
        };
        let eta = (k[[i, i]] + k[[j, j]] - 2.0 * k[[i, j]]).max(MIN_CURVATURE);
        let aj_new = (aj_old + yj * (err[i] - err[j]) / eta).clamp(lo, hi);
        let ai_new = (ai_old + yi * yj * (aj_old - aj_new)).clamp(0.0, c);
        let (di, dj) = (ai_new - ai_old, aj_new - aj_old);
        if di == 0.0 && dj == 0.0 {
            // pair is stuck at its bounds; nothing left to move
            break;
        }
        alpha[i] = ai_new;
        alpha[j] = aj_new;
        for (t, e) in err.iter_mut().enumerate() {
            *e += di * yi * k[[i, t]] + dj * yj * k[[j, t]];
        }
    }

    let bias = compute_bias(&alpha, &ys, &err, c);
    let support = (0..n).filter(|&i| alpha[i] > SUPPORT_EPS).collect();
    Ok(SvmModel { alphas: alpha, bias, support, labels: y.to_vec(), c, converged, iterations })
}

/// Index sets for the violating-pair search:
/// `upper` must satisfy `err <= -b`, `lower` must satisfy `err >= -b`.
fn in_upper(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

fn in_lower(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn violating_pair(alpha: &[f64], ys: &[f64], err: &[f64], c: f64) -> (Option<usize>, Option<usize>) {
    let mut up: Option<usize> = None;
    let mut low: Option<usize> = None;
    for t in 0..alpha.len() {
        if in_upper(alpha[t], ys[t], c) && up.is_none_or(|u| err[t] > err[u]) {
            up = Some(t);
        }
        if in_lower(alpha[t], ys[t], c) && low.is_none_or(|l| err[t] < err[l]) {
            low = Some(t);
        }
    }
    (up, low)
}

/// Average of `-err` over free multipliers, else the midpoint of the feasible interval.
fn compute_bias(alpha: &[f64], ys: &[f64], err: &[f64], c: f64) -> f64 {
    let free: Vec<usize> = (0..alpha.len())
        .filter(|&t| alpha[t] > SUPPORT_EPS && alpha[t] < c - SUPPORT_EPS)
        .collect();
    if !free.is_empty() {
        return -free.iter().map(|&t| err[t]).sum::<f64>() / free.len() as f64;
    }
    let upper_max = (0..alpha.len())
        .filter(|&t| in_upper(alpha[t], ys[t], c))
        .map(|t| err[t])
        .fold(f64::NEG_INFINITY, f64::max);
    let lower_min = (0..alpha.len())
        .filter(|&t| in_lower(alpha[t], ys[t], c))
        .map(|t| err[t])
        .fold(f64::INFINITY, f64::min);
    let beta = match (upper_max.is_finite(), lower_min.is_finite()) {
        (true, true) => 0.5 * (upper_max + lower_min),
        (true, false) => upper_max,
        (false, true) => lower_min,
        (false, false) => 0.0,
    };
    -beta
}

impl SvmModel {
    /// Dual objective at the stored multipliers for the training kernel `k`.
    pub fn dual_objective(&self, k: ArrayView2<'_, f64>) -> f64 {
        let n = self.alphas.len();
        let ay: Vec<f64> = (0..n).map(|i| self.alphas[i] * sign(self.labels[i])).collect();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += ay[i] * ay[j] * k[[i, j]];
            }
        }
        self.alphas.iter().sum::<f64>() - 0.5 * quad
    }

    /// Largest KKT violation in units of the margin `y_i f(x_i) - 1`.
    pub fn kkt_residual(&self, k: ArrayView2<'_, f64>) -> Result<f64> {
        let f = decision_values(self, k)?;
        let mut worst: f64 = 0.0;
        for (i, fi) in f.iter().enumerate() {
            let margin = sign(self.labels[i]) * fi - 1.0;
            let a = self.alphas[i];
            let v = if a <= SUPPORT_EPS {
                (-margin).max(0.0)
            } else if a >= self.c - SUPPORT_EPS {
                margin.max(0.0)
            } else {
                margin.abs()
            };
            worst = worst.max(v);
        }
        Ok(worst)
    }

    pub fn alpha_y_sum(&self) -> f64 {
        self.alphas.iter().zip(&self.labels).map(|(a, &l)| a * sign(l)).sum()
    }
}

/// `f_j = sum_i a_i y_i K(test_j, train_i) + b` for an `m x n` test-by-train kernel.
pub fn decision_values(model: &SvmModel, k_test_train: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    let n = model.alphas.len();
    if k_test_train.ncols() != n {
        return Err(Error::shape(format!("{n} training columns"), k_test_train.ncols()));
    }
    Ok(k_test_train
        .outer_iter()
        .map(|row| {
            model.support.iter().map(|&i| model.alphas[i] * sign(model.labels[i]) * row[i]).sum::<f64>() + model.bias
        })
        .collect())
}

/// Sign of the decision value; zero maps to +1.
pub fn predict(model: &SvmModel, k_test_train: ArrayView2<'_, f64>) -> Result<Vec<i8>> {
    Ok(decision_values(model, k_test_train)?
        .into_iter()
        .map(|f| if f >= 0.0 { 1 } else { -1 })
        .collect())
}

/// Fraction of matching labels; an empty input scores 0.
pub fn accuracy(pred: &[i8], truth: &[i8]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / pred.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Poly,
    Rbf,
    Sigmoid,
}

/// Classical kernel parameters. `gamma = None` resolves to `1 / (p * var(X))`
/// on the training matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalKernelSpec {
    pub kind: KernelKind,
    pub degree: i32,
    pub gamma: Option<f64>,
    pub coef0: f64,
}

impl ClassicalKernelSpec {
    pub fn linear() -> Self {
        Self { kind: KernelKind::Linear, degree: 3, gamma: None, coef0: 0.0 }
    }

    pub fn poly() -> Self {
        Self { kind: KernelKind::Poly, degree: 3, gamma: None, coef0: 1.0 }
    }

    pub fn rbf() -> Self {
        Self { kind: KernelKind::Rbf, degree: 3, gamma: None, coef0: 0.0 }
    }

    pub fn sigmoid() -> Self {
        Self { kind: KernelKind::Sigmoid, degree: 3, gamma: None, coef0: 0.0 }
    }

    /// Fix `gamma` from the training matrix when unset.
    pub fn resolved(self, train: ArrayView2<'_, f64>) -> Self {
        if self.gamma.is_some() {
            return self;
        }
        let count = train.len() as f64;
        let mean = train.sum() / count;
        let var = train.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
        let p = train.ncols() as f64;
        let gamma = if var > 0.0 { 1.0 / (p * var) } else { 1.0 };
        Self { gamma: Some(gamma), ..self }
    }
}

/// Kernel matrix between the rows of `xa` and `xb`.
pub fn classical_kernel(spec: &ClassicalKernelSpec, xa: ArrayView2<'_, f64>, xb: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if xa.ncols() != xb.ncols() {
        return Err(Error::shape(format!("{} columns", xa.ncols()), xb.ncols()));
    }
    let gamma = spec.gamma.unwrap_or_else(|| spec.resolved(xa).gamma.unwrap_or(1.0));
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma must be positive"));
    }
    let mut out = Array2::zeros((xa.nrows(), xb.nrows()));
    for (i, a) in xa.outer_iter().enumerate() {
        for (j, b) in xb.outer_iter().enumerate() {
            out[[i, j]] = match spec.kind {
                KernelKind::Linear => a.dot(&b),
                KernelKind::Poly => (gamma * a.dot(&b) + spec.coef0).powi(spec.degree),
                KernelKind::Rbf => {
                    let d2: f64 = a.iter().zip(b.iter()).map(|(u, v)| (u - v).powi(2)).sum();
                    (-gamma * d2).exp()
                }
                KernelKind::Sigmoid => (gamma * a.dot(&b) + spec.coef0).tanh(),
            };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_point_identity_kernel() {
        let k = Array2::eye(2);
        let m = smo_train(k.view(), &[1, -1], SmoParams { c: 10.0, ..Default::default() }).unwrap();
        assert!(m.converged);
        assert!((m.alphas[0] - 1.0).abs() < 1e-9);
        assert!((m.alphas[1] - 1.0).abs() < 1e-9);
        assert!(m.bias.abs() < 1e-9);
        assert_eq!(predict(&m, k.view()).unwrap(), vec![1, -1]);
    }

    #[test]
    fn identical_labels_give_trivial_model() {
        let k = Array2::eye(3);
        let m = smo_train(k.view(), &[-1, -1, -1], SmoParams::default()).unwrap();
        assert!(m.converged);
        assert!(m.alphas.iter().all(|&a| a == 0.0));
        assert_eq!(m.bias, -1.0);
        assert_eq!(predict(&m, k.view()).unwrap(), vec![-1; 3]);
    }

    #[test]
    fn rejects_asymmetric_and_bad_shapes() {
        let k = array![[1.0, 0.5], [0.4, 1.0]];
        assert!(smo_train(k.view(), &[1, -1], SmoParams::default()).is_err());
        assert!(smo_train(Array2::eye(3).view(), &[1, -1], SmoParams::default()).is_err());
        assert!(smo_train(Array2::eye(2).view(), &[1, 0], SmoParams::default()).is_err());
    }

    #[test]
    fn hand_expanded_decision() {
        let m = SvmModel {
            alphas: vec![0.5, 0.0, 0.25],
            bias: 0.1,
            support: vec![0, 2],
            labels: vec![1, -1, -1],
            c: 1.0,
            converged: true,
            iterations: 0,
        };
        let k = array![[0.2, 9.0, 0.4], [1.0, 9.0, 1.0]];
        let f = decision_values(&m, k.view()).unwrap();
        assert!((f[0] - (0.5 * 0.2 - 0.25 * 0.4 + 0.1)).abs() < 1e-15);
        assert!((f[1] - (0.5 - 0.25 + 0.1)).abs() < 1e-15);
        assert!(decision_values(&m, Array2::zeros((0, 3)).view()).unwrap().is_empty());
        assert!(decision_values(&m, Array2::zeros((1, 2)).view()).is_err());
    }

    #[test]
    fn zero_decision_predicts_positive() {
        let m = SvmModel {
            alphas: vec![0.0],
            bias: 0.0,
            support: vec![],
            labels: vec![-1],
            c: 1.0,
            converged: true,
            iterations: 0,
        };
        assert_eq!(predict(&m, array![[0.3]].view()).unwrap(), vec![1]);
    }

    #[test]
    fn accuracy_cases() {
        assert_eq!(accuracy(&[1, -1, 1, -1], &[1, -1, 1, -1]), 1.0);
        assert_eq!(accuracy(&[-1, 1], &[1, -1]), 0.0);
        assert_eq!(accuracy(&[1, 1, 1, -1], &[1, 1, 1, 1]), 0.75);
    }

    #[test]
    fn classical_kernel_cases() {
        let x = array![[1.0, 0.0], [0.0, 1.0]];
        let rbf = classical_kernel(&ClassicalKernelSpec { gamma: Some(0.7), ..ClassicalKernelSpec::rbf() }, x.view(), x.view()).unwrap();
        assert_eq!(rbf[[0, 0]], 1.0);
        let lin = classical_kernel(&ClassicalKernelSpec::linear(), x.view(), x.view()).unwrap();
        assert_eq!(lin[[0, 1]], 0.0);
        let one = array![[1.0]];
        let poly = classical_kernel(&ClassicalKernelSpec { gamma: Some(1.0), ..ClassicalKernelSpec::poly() }, one.view(), one.view()).unwrap();
        assert_eq!(poly[[0, 0]], 8.0);
        assert!(classical_kernel(&ClassicalKernelSpec::linear(), x.view(), one.view()).is_err());
    }

    #[test]
    fn gamma_scale_default() {
        let x = array![[0.0, 2.0], [2.0, 0.0]];
        let spec = ClassicalKernelSpec::rbf().resolved(x.view());
        // var of {0,2,2,0} is 1, p = 2
        assert_eq!(spec.gamma, Some(0.5));
    }
}
