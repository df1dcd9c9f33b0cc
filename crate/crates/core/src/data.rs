//! Dataset loading and the preprocessing shared by every evaluator: min-max
//! angle scaling, stratified fold plans and the feature covariance score.

use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class mark for malignant samples.
pub const MALIGNANT: i8 = 1;
/// Class mark for benign samples.
pub const BENIGN: i8 = -1;

/// Column names of the Wisconsin diagnostic data, in file order.
pub const WDBC_FEATURE_NAMES: [&str; 30] = [
    "mean radius",
    "mean texture",
    "mean perimeter",
    "mean area",
    "mean smoothness",
    "mean compactness",
    "mean concavity",
    "mean concave points",
    "mean symmetry",
    "mean fractal dimension",
    "radius error",
    "texture error",
    "perimeter error",
    "area error",
    "smoothness error",
    "compactness error",
    "concavity error",
    "concave points error",
    "symmetry error",
    "fractal dimension error",
    "worst radius",
    "worst texture",
    "worst perimeter",
    "worst area",
    "worst smoothness",
    "worst compactness",
    "worst concavity",
    "worst concave points",
    "worst symmetry",
    "worst fractal dimension",
];

const WDBC_FIELDS: usize = 32;

/// Labelled feature matrix with ±1 class marks.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<i8>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<i8>, feature_names: Vec<String>) -> Result<Self> {
        let (n, p) = features.dim();
        if n == 0 || p == 0 {
            return Err(Error::invalid("dataset must have at least one row and one column"));
        }
        if labels.len() != n {
            return Err(Error::shape(format!("{n} labels"), labels.len()));
        }
        if feature_names.len() != p {
            return Err(Error::shape(format!("{p} feature names"), feature_names.len()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l != MALIGNANT && l != BENIGN) {
            return Err(Error::invalid(format!("label {bad} is not +1 or -1")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
        Ok(Self { features, labels, feature_names })
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Copy of the given rows, keeping column order and names.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Load a WDBC-formatted CSV: `id, diagnosis, 30 features` per row.
///
/// A leading row whose id field is not numeric is treated as a header and
/// skipped. Row numbers in errors are 1-based file lines.
pub fn load_wdbc(path: impl AsRef<Path>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_wdbc(&text)
}

/// Parse WDBC rows from an in-memory string. See [`load_wdbc`].
pub fn parse_wdbc(text: &str) -> Result<Dataset> {
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut seen_data = false;

    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !seen_data && fields[0].parse::<f64>().is_err() {
            // header
            continue;
        }
        seen_data = true;
        if fields.len() != WDBC_FIELDS {
            return Err(Error::Parse {
                row,
                message: format!("expected {WDBC_FIELDS} fields, found {}", fields.len()),
            });
        }
        let label = match fields[1] {
            "M" => MALIGNANT,
            "B" => BENIGN,
            other => {
                return Err(Error::Parse { row, message: format!("unknown diagnosis {other:?}") });
            }
        };
        for (col, raw) in fields[2..].iter().enumerate() {
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row,
                message: format!("feature {col} is not numeric: {raw:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row, message: format!("feature {col} is not finite") });
            }
            values.push(v);
        }
        labels.push(label);
    }

    if labels.is_empty() {
        return Err(Error::Parse { row: 0, message: "no data rows".into() });
    }
    let p = WDBC_FIELDS - 2;
    let features = Array2::from_shape_vec((labels.len(), p), values)
        .expect("row width checked per line");
    let names = WDBC_FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    Dataset::new(features, labels, names)
}

/// Per-column min-max scaler onto `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

/// Fit a [`Scaler`] on the listed rows only.
pub fn fit_scaler(features: ArrayView2<'_, f64>, rows: &[usize], lo: f64, hi: f64) -> Result<Scaler> {
    if rows.is_empty() {
        return Err(Error::invalid("scaler needs at least one row"));
    }
    if !(lo < hi) {
        return Err(Error::invalid(format!("scale range [{lo}, {hi}] is empty")));
    }
    let n = features.nrows();
    if let Some(&r) = rows.iter().find(|&&r| r >= n) {
        return Err(Error::invalid(format!("row {r} out of range for {n} rows")));
    }
    let p = features.ncols();
    let mut min = vec![f64::INFINITY; p];
    let mut max = vec![f64::NEG_INFINITY; p];
    for &r in rows {
        for (c, &v) in features.row(r).iter().enumerate() {
            min[c] = min[c].min(v);
            max[c] = max[c].max(v);
        }
    }
    Ok(Scaler { min, max, lo, hi })
}

impl Scaler {
    pub fn n_columns(&self) -> usize {
        self.min.len()
    }

    fn scale_value(&self, col: usize, v: f64) -> f64 {
        let (min, max) = (self.min[col], self.max[col]);
        // constant column maps to lo
        if max <= min {
            return self.lo;
        }
        let t = self.lo + (v - min) * (self.hi - self.lo) / (max - min);
        t.clamp(self.lo, self.hi)
    }

    /// Scale every column; values outside the fitted range clamp to `[lo, hi]`.
    pub fn transform(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.n_columns() {
            return Err(Error::shape(format!("{} columns", self.n_columns()), features.ncols()));
        }
        let mut out = features.to_owned();
        for ((_, c), v) in out.indexed_iter_mut() {
            *v = self.scale_value(c, *v);
        }
        Ok(out)
    }
}

/// Free-function form of [`Scaler::transform`].
pub fn apply_scaler(scaler: &Scaler, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    scaler.transform(features)
}

/// Assignment of every row to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// Held-out rows of fold `fold`, ascending.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    /// Training rows of fold `fold` (everything not held out), ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified k-fold split.
///
/// Each class is shuffled with a seeded ChaCha8 stream and dealt round-robin;
/// the deal continues where the previous class stopped so fold sizes differ
/// by at most one.
pub fn stratified_kfold(labels: &[i8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid(format!("k-fold needs k >= 2, got {k}")));
    }
    let mut classes: Vec<i8> = labels.to_vec();
    classes.sort_unstable_by(|a, b| b.cmp(a));
    classes.dedup();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![usize::MAX; labels.len()];
    let mut next = 0usize;
    for class in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::invalid(format!(
                "class {class} has {} members, fewer than k = {k}",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for idx in members {
            assignments[idx] = next % k;
            next += 1;
        }
    }
    Ok(FoldPlan { k, assignments })
}

/// Population variance of every column.
pub fn column_variances(features: ArrayView2<'_, f64>) -> Vec<f64> {
    features
        .columns()
        .into_iter()
        .map(|col| {
            let n = col.len() as f64;
            let mean = col.sum() / n;
            col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
        })
        .collect()
}

/// Sum of absolute pairwise covariances between the standardized columns.
///
/// Every selected column is standardized to zero mean and unit (population)
/// variance over the rows of `features`, so each term is an absolute
/// correlation. A zero-variance column standardizes to all zeros.
pub fn pairwise_covariance_score(features: ArrayView2<'_, f64>, columns: &[usize]) -> Result<f64> {
    let p = features.ncols();
    if let Some(&c) = columns.iter().find(|&&c| c >= p) {
        return Err(Error::invalid(format!("column {c} out of range for {p} columns")));
    }
    if columns.len() <= 1 || features.nrows() == 0 {
        return Ok(0.0);
    }
    let n = features.nrows() as f64;
    let standardized: Vec<Vec<f64>> = columns
        .iter()
        .map(|&c| {
            let col = features.column(c);
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            if var <= 0.0 {
                vec![0.0; col.len()]
            } else {
                let sd = var.sqrt();
                col.iter().map(|v| (v - mean) / sd).collect()
            }
        })
        .collect();

    let mut total = 0.0;
    for i in 0..standardized.len() {
        for j in (i + 1)..standardized.len() {
            let cov: f64 = standardized[i].iter().zip(&standardized[j]).map(|(a, b)| a * b).sum::<f64>() / n;
            total += cov.abs();
        }
    }
    Ok(total)
}
