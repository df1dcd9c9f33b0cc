//! Univariate filter scoring (chi2, f-regression), top-k selection and the
//! classical classifiers used as comparison baselines.

use std::cmp::Ordering;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{stratified_kfold, Dataset};
use crate::error::{Error, Result};
use crate::svm::{classical_kernel, predict, smo_train, ClassicalKernelSpec, SmoParams};

/// Score assigned to a feature perfectly correlated with the target.
pub const F_REGRESSION_CAP: f64 = f64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMethod {
    Chi2,
    FRegression,
}

impl std::str::FromStr for ScoreMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chi2" => Ok(ScoreMethod::Chi2),
            "f_regression" | "f-regression" => Ok(ScoreMethod::FRegression),
            other => Err(Error::invalid(format!("unknown scoring method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScores {
    pub scores: Vec<f64>,
    pub method: ScoreMethod,
}

/// Chi-squared statistic of each non-negative feature against the class.
///
/// Observed counts are per-class feature sums; expected counts split each
/// feature's total by the class priors.
pub fn chi2_scores(x: ArrayView2<'_, f64>, y: &[i8]) -> Result<FeatureScores> {
    if x.nrows() != y.len() {
        return Err(Error::shape(format!("{} labels", x.nrows()), y.len()));
    }
    if x.iter().any(|&v| v < 0.0) {
        return Err(Error::invalid("chi2 requires non-negative features"));
    }
    let n = y.len() as f64;
    let mut classes: Vec<i8> = y.to_vec();
    classes.sort_unstable();
    classes.dedup();

    let totals = x.sum_axis(Axis(0));
    let mut scores = vec![0.0; x.ncols()];
    for &class in &classes {
        let rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        let prior = rows.len() as f64 / n;
        let observed = x.select(Axis(0), &rows).sum_axis(Axis(0));
        for f in 0..x.ncols() {
            let expected = prior * totals[f];
            if expected > 0.0 {
                scores[f] += (observed[f] - expected).powi(2) / expected;
            }
        }
    }
    Ok(FeatureScores { scores, method: ScoreMethod::Chi2 })
}

/// Univariate linear-regression F statistic `r^2 / (1 - r^2) * (n - 2)` of
/// each feature against the ±1 target.
pub fn f_regression_scores(x: ArrayView2<'_, f64>, y: &[i8]) -> Result<FeatureScores> {
    let n = y.len();
    if x.nrows() != n {
        return Err(Error::shape(format!("{} labels", x.nrows()), n));
    }
    if n < 3 {
        return Err(Error::invalid("f-regression needs at least 3 samples"));
    }
    let yv: Vec<f64> = y.iter().map(|&l| l as f64).collect();
    let y_mean = yv.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = yv.iter().map(|v| v - y_mean).collect();
    let y_norm = yc.iter().map(|v| v * v).sum::<f64>().sqrt();

    let scores = x
        .columns()
        .into_iter()
        .map(|col| {
            let mean = col.sum() / n as f64;
            let xc: Vec<f64> = col.iter().map(|v| v - mean).collect();
            let x_norm = xc.iter().map(|v| v * v).sum::<f64>().sqrt();
            if x_norm == 0.0 || y_norm == 0.0 {
                return 0.0;
            }
            let r = xc.iter().zip(&yc).map(|(a, b)| a * b).sum::<f64>() / (x_norm * y_norm);
            let r2 = r * r;
            if r2 >= 1.0 {
                F_REGRESSION_CAP
            } else {
                (r2 / (1.0 - r2) * (n as f64 - 2.0)).min(F_REGRESSION_CAP)
            }
        })
        .collect();
    Ok(FeatureScores { scores, method: ScoreMethod::FRegression })
}

pub fn feature_scores(method: ScoreMethod, x: ArrayView2<'_, f64>, y: &[i8]) -> Result<FeatureScores> {
    match method {
        ScoreMethod::Chi2 => chi2_scores(x, y),
        ScoreMethod::FRegression => f_regression_scores(x, y),
    }
}

/// Indices of the `k` largest scores, ties to the lower index, returned ascending.
pub fn select_k_best(scores: &FeatureScores, k: usize) -> Result<Vec<usize>> {
    let p = scores.scores.len();
    if k == 0 || k > p {
        return Err(Error::invalid(format!("k = {k} outside [1, {p}]")));
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        scores.scores[b].partial_cmp(&scores.scores[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    let mut chosen = order[..k].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Per-column standardisation fitted on training rows.
#[derive(Debug, Clone)]
pub struct Standardizer {
    mean: Array1<f64>,
    scale: Array1<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean = x.sum_axis(Axis(0)) / n;
        let scale = x
            .columns()
            .into_iter()
            .zip(mean.iter())
            .map(|(col, &m)| {
                let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        (&x - &self.mean) / &self.scale
    }
}

/// Gaussian naive Bayes with a fixed variance floor.
#[derive(Debug, Clone)]
pub struct GaussianNb {
    classes: Vec<i8>,
    log_priors: Vec<f64>,
    means: Vec<Vec<f64>>,
    vars: Vec<f64>,
    var_len: usize,
}

pub const NB_VAR_FLOOR: f64 = 1e-9;

impl GaussianNb {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[i8]) -> Result<Self> {
        check_train(x, y)?;
        let mut classes = y.to_vec();
        classes.sort_unstable();
        classes.dedup();
        let p = x.ncols();
        let mut log_priors = Vec::new();
        let mut means = Vec::new();
        let mut vars = Vec::new();
        for &c in &classes {
            let rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
            let sub = x.select(Axis(0), &rows);
            let m = rows.len() as f64;
            let mean: Vec<f64> = (sub.sum_axis(Axis(0)) / m).to_vec();
            for (f, mu) in mean.iter().enumerate() {
                let var = sub.column(f).iter().map(|v| (v - mu).powi(2)).sum::<f64>() / m;
                vars.push(var.max(NB_VAR_FLOOR));
            }
            log_priors.push((m / y.len() as f64).ln());
            means.push(mean);
        }
        Ok(Self { classes, log_priors, means, vars, var_len: p })
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<i8> {
        x.outer_iter()
            .map(|row| {
                let mut best = (f64::NEG_INFINITY, self.classes[0]);
                for (ci, &c) in self.classes.iter().enumerate() {
                    let mut ll = self.log_priors[ci];
                    for (f, v) in row.iter().enumerate() {
                        let var = self.vars[ci * self.var_len + f];
                        let d = v - self.means[ci][f];
                        ll -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var);
                    }
                    if ll > best.0 {
                        best = (ll, c);
                    }
                }
                best.1
            })
            .collect()
    }
}

/// Majority vote of the `k` nearest training rows (Euclidean).
#[derive(Debug, Clone)]
pub struct KNeighbors {
    k: usize,
    x: Array2<f64>,
    y: Vec<i8>,
}

impl KNeighbors {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[i8], k: usize) -> Result<Self> {
        check_train(x, y)?;
        if k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        Ok(Self { k, x: x.to_owned(), y: y.to_vec() })
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<i8> {
        let k = self.k.min(self.y.len());
        x.outer_iter()
            .map(|row| {
                let mut dist: Vec<(f64, usize)> = self
                    .x
                    .outer_iter()
                    .enumerate()
                    .map(|(i, t)| (t.iter().zip(row.iter()).map(|(a, b)| (a - b).powi(2)).sum(), i))
                    .collect();
                dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
                let votes: i32 = dist[..k].iter().map(|&(_, i)| self.y[i] as i32).sum();
                match votes.cmp(&0) {
                    Ordering::Greater => 1,
                    Ordering::Less => -1,
                    Ordering::Equal => self.y[dist[0].1],
                }
            })
            .collect()
    }
}

/// L2-regularised logistic regression trained by full-batch gradient descent
/// from a zero start.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    weights: Array1<f64>,
    bias: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct LogisticParams {
    pub l2: f64,
    pub learning_rate: f64,
    pub iterations: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self { l2: 1e-4, learning_rate: 0.1, iterations: 500 }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LogisticRegression {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[i8], params: LogisticParams) -> Result<Self> {
        check_train(x, y)?;
        let n = y.len() as f64;
        let target: Array1<f64> = y.iter().map(|&l| if l > 0 { 1.0 } else { 0.0 }).collect();
        let mut w = Array1::<f64>::zeros(x.ncols());
        let mut b = 0.0;
        for _ in 0..params.iterations {
            let z = x.dot(&w) + b;
            let resid = z.mapv(sigmoid) - &target;
            let grad_w = x.t().dot(&resid) / n + &w * params.l2;
            let grad_b = resid.sum() / n;
            w = w - grad_w * params.learning_rate;
            b -= params.learning_rate * grad_b;
        }
        Ok(Self { weights: w, bias: b })
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<i8> {
        (x.dot(&self.weights) + self.bias).iter().map(|&z| if z >= 0.0 { 1 } else { -1 }).collect()
    }
}

fn check_train(x: ArrayView2<'_, f64>, y: &[i8]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::shape(format!("{} labels", x.nrows()), y.len()));
    }
    if y.is_empty() {
        return Err(Error::invalid("cannot train on zero samples"));
    }
    Ok(())
}

/// Baseline classifiers of the comparison grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Baseline {
    SvmLinear,
    SvmPoly,
    SvmRbf,
    SvmSigmoid,
    LogisticRegression,
    NaiveBayes,
    KNeighbors,
}

impl Baseline {
    pub const ALL: [Baseline; 7] = [
        Baseline::SvmLinear,
        Baseline::SvmPoly,
        Baseline::SvmRbf,
        Baseline::SvmSigmoid,
        Baseline::LogisticRegression,
        Baseline::NaiveBayes,
        Baseline::KNeighbors,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::SvmLinear => "SVM (Linear)",
            Baseline::SvmPoly => "SVM (Poly)",
            Baseline::SvmRbf => "SVM (RBF)",
            Baseline::SvmSigmoid => "SVM (Sigmoid)",
            Baseline::LogisticRegression => "Logistic Regression",
            Baseline::NaiveBayes => "Naive Bayes",
            Baseline::KNeighbors => "K-Neighbors",
        }
    }

    /// Fit on the training split and label the test split.
    ///
    /// Everything except naive Bayes sees features standardized on the
    /// training rows.
    pub fn fit_predict(self, train: ArrayView2<'_, f64>, y: &[i8], test: ArrayView2<'_, f64>, svm: SmoParams) -> Result<Vec<i8>> {
        if self == Baseline::NaiveBayes {
            return Ok(GaussianNb::fit(train, y)?.predict(test));
        }
        let scaler = Standardizer::fit(train);
        let (tr, te) = (scaler.transform(train), scaler.transform(test));
        let kernel = match self {
            Baseline::SvmLinear => ClassicalKernelSpec::linear(),
            Baseline::SvmPoly => ClassicalKernelSpec::poly(),
            Baseline::SvmRbf => ClassicalKernelSpec::rbf(),
            Baseline::SvmSigmoid => ClassicalKernelSpec::sigmoid(),
            Baseline::LogisticRegression => {
                return Ok(LogisticRegression::fit(tr.view(), y, LogisticParams::default())?.predict(te.view()));
            }
            Baseline::KNeighbors => return Ok(KNeighbors::fit(tr.view(), y, 5)?.predict(te.view())),
            Baseline::NaiveBayes => unreachable!("handled above"),
        }
        .resolved(tr.view());
        let k_train = classical_kernel(&kernel, tr.view(), tr.view())?;
        let model = smo_train(k_train.view(), y, svm)?;
        let k_test = classical_kernel(&kernel, te.view(), tr.view())?;
        predict(&model, k_test.view())
    }
}

/// Mean held-out accuracy of `baseline` over a stratified k-fold split,
/// restricted to `features`.
pub fn cv_accuracy(dataset: &Dataset, features: &[usize], baseline: Baseline, folds: usize, seed: u64, svm: SmoParams) -> Result<f64> {
    let x = dataset.features.select(Axis(1), features);
    let plan = stratified_kfold(&dataset.labels, folds, seed)?;
    let mut total = 0.0;
    for f in 0..folds {
        let (tr, te) = (plan.train_indices(f), plan.test_indices(f));
        let ytr: Vec<i8> = tr.iter().map(|&i| dataset.labels[i]).collect();
        let yte: Vec<i8> = te.iter().map(|&i| dataset.labels[i]).collect();
        let pred = baseline.fit_predict(x.select(Axis(0), &tr).view(), &ytr, x.select(Axis(0), &te).view(), svm)?;
        total += crate::svm::accuracy(&pred, &yte);
    }
    Ok(total / folds as f64)
}
