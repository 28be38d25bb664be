//! Least-squares classifiers over (optionally quadratically expanded)
//! feature vectors.
//!
//! Training is a closed-form normal-equation solve against one-hot targets:
//! standardize the features, expand them, append a bias term, and solve
//! `(GᵀG + λD)W = GᵀT` where `D` is the identity with a zero in the bias row
//! so the intercept is never penalized. Prediction takes the argmax of the
//! class scores, breaking exact ties toward the lowest class index.

use nalgebra::{Cholesky, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// How feature vectors are expanded before the linear solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpansionMode {
    /// Use the features as-is (the linear classifier).
    #[default]
    None,
    /// Append the square of every feature (the diagonal quadratic
    /// classifier).
    Diagonal,
    /// Append every product x_m·x_n for m ≤ n.
    Full,
}

impl ExpansionMode {
    /// Expanded length for `l` input features, excluding the bias.
    pub fn expanded_len(self, l: usize) -> usize {
        match self {
            ExpansionMode::None => l,
            ExpansionMode::Diagonal => 2 * l,
            ExpansionMode::Full => l + l * (l + 1) / 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExpansionMode::None => "none",
            ExpansionMode::Diagonal => "diagonal",
            ExpansionMode::Full => "full",
        }
    }
}

impl FromStr for ExpansionMode {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "linear" => Ok(ExpansionMode::None),
            "diagonal" | "quadratic" => Ok(ExpansionMode::Diagonal),
            "full" => Ok(ExpansionMode::Full),
            other => Err(ClassifierError::InvalidInput(format!(
                "unknown expansion mode {other:?}"
            ))),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("normal equations singular even after ridge fallback")]
    SingularSystem,
    #[error("model serialization: {0}")]
    Serialization(String),
}

/// Feature rows with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_count: usize,
}

impl LabeledDataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self, ClassifierError> {
        if class_count == 0 {
            return Err(ClassifierError::InvalidDataset("zero classes".into()));
        }
        if features.len() != labels.len() {
            return Err(ClassifierError::InvalidDataset(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if features.len() < class_count {
            return Err(ClassifierError::InvalidDataset(format!(
                "{} patterns cannot cover {} classes",
                features.len(),
                class_count
            )));
        }
        let width = features[0].len();
        if width == 0 {
            return Err(ClassifierError::InvalidDataset("zero-width features".into()));
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != width {
                return Err(ClassifierError::InvalidDataset(format!(
                    "row {i} has {} values, expected {width}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(ClassifierError::InvalidDataset(format!(
                    "row {i} contains a non-finite value"
                )));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(ClassifierError::InvalidDataset(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        Ok(Self {
            features,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_len(&self) -> usize {
        self.features[0].len()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// Per-feature affine normalization fitted on training data and applied
/// identically everywhere. Scales are floored so constant features do not
/// divide by zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &[Vec<f64>]) -> Self {
        let p = features.len() as f64;
        let width = features[0].len();
        let mut mean = vec![0.0; width];
        for row in features {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= p;
        }
        let mut var = vec![0.0; width];
        for row in features {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| (s / p).sqrt().max(1e-12))
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Append the quadratic terms selected by `mode` to a copy of `x`.
pub fn quadratic_expand(x: &[f64], mode: ExpansionMode) -> Vec<f64> {
    let mut out = Vec::with_capacity(mode.expanded_len(x.len()));
    out.extend_from_slice(x);
    match mode {
        ExpansionMode::None => {}
        ExpansionMode::Diagonal => out.extend(x.iter().map(|v| v * v)),
        ExpansionMode::Full => {
            for m in 0..x.len() {
                for n in m..x.len() {
                    out.push(x[m] * x[n]);
                }
            }
        }
    }
    out
}

/// A fitted least-squares classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    mode: ExpansionMode,
    standardizer: Standardizer,
    /// (L' + 1) rows of K_c weights each; the last row is the bias.
    weights: Vec<Vec<f64>>,
    class_count: usize,
    /// The ridge actually used in the solve.
    ridge: f64,
    /// True when a singular system forced the automatic tiny-ridge retry.
    ridge_fallback: bool,
}

impl LinearModel {
    pub fn mode(&self) -> ExpansionMode {
        self.mode
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_len(&self) -> usize {
        self.standardizer.len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn ridge_fallback(&self) -> bool {
        self.ridge_fallback
    }

    pub fn to_json(&self) -> Result<String, ClassifierError> {
        serde_json::to_string(self).map_err(|e| ClassifierError::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifierError> {
        serde_json::from_str(text).map_err(|e| ClassifierError::Serialization(e.to_string()))
    }
}

/// Design row for one pattern: standardized, expanded, bias appended.
fn design_row(model_mode: ExpansionMode, standardizer: &Standardizer, x: &[f64]) -> Vec<f64> {
    let mut g = quadratic_expand(&standardizer.apply(x), model_mode);
    g.push(1.0);
    g
}

/// Accumulate `GᵀG` and `GᵀT` over fixed-size row chunks in parallel, then
/// combine the per-chunk sums in chunk order. The chunking, not the thread
/// schedule, decides the summation order, so results are bit-identical for
/// any worker count.
fn accumulate_normal_equations(
    dataset: &LabeledDataset,
    mode: ExpansionMode,
    standardizer: &Standardizer,
    n: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    const CHUNK: usize = 512;
    let k_c = dataset.class_count();
    let rows: Vec<_> = dataset
        .features()
        .chunks(CHUNK)
        .zip(dataset.labels().chunks(CHUNK))
        .collect();
    let partials: Vec<(DMatrix<f64>, DMatrix<f64>)> = rows
        .into_par_iter()
        .map(|(feats, labels)| {
            let mut gtg = DMatrix::zeros(n, n);
            let mut gtt = DMatrix::zeros(n, k_c);
            for (x, &label) in feats.iter().zip(labels) {
                let g = design_row(mode, standardizer, x);
                for i in 0..n {
                    let gi = g[i];
                    if gi == 0.0 {
                        continue;
                    }
                    for j in 0..=i {
                        gtg[(i, j)] += gi * g[j];
                    }
                    gtt[(i, label)] += gi;
                }
            }
            (gtg, gtt)
        })
        .collect();
    let mut gtg = DMatrix::zeros(n, n);
    let mut gtt = DMatrix::zeros(n, k_c);
    for (pg, pt) in partials {
        gtg += pg;
        gtt += pt;
    }
    // mirror the lower triangle
    for i in 0..n {
        for j in i + 1..n {
            gtg[(i, j)] = gtg[(j, i)];
        }
    }
    (gtg, gtt)
}

fn try_solve(
    gtg: &DMatrix<f64>,
    gtt: &DMatrix<f64>,
    ridge: f64,
) -> Option<DMatrix<f64>> {
    let n = gtg.nrows();
    let mut a = gtg.clone();
    // bias row/column stays unpenalized
    for i in 0..n - 1 {
        a[(i, i)] += ridge;
    }
    let w = Cholesky::new(a)?.solve(gtt);
    w.iter().all(|v| v.is_finite()).then_some(w)
}

/// Fit the one-hot least-squares model in closed form. A singular system at
/// the requested ridge is retried once with a tiny data-scaled ridge and the
/// retry is flagged on the returned model.
pub fn fit_least_squares(
    dataset: &LabeledDataset,
    mode: ExpansionMode,
    ridge: f64,
) -> Result<LinearModel, ClassifierError> {
    if ridge < 0.0 || ridge.is_nan() {
        return Err(ClassifierError::InvalidInput(format!(
            "ridge must be >= 0, got {ridge}"
        )));
    }
    let standardizer = Standardizer::fit(dataset.features());
    let l_expanded = mode.expanded_len(dataset.feature_len());
    let n = l_expanded + 1;
    let (gtg, gtt) = accumulate_normal_equations(dataset, mode, &standardizer, n);

    let (weights, effective_ridge, fallback) = match try_solve(&gtg, &gtt, ridge) {
        Some(w) => (w, ridge, false),
        None => {
            let fallback_ridge = ridge.max(1e-8 * gtg.trace() / l_expanded as f64);
            let w = try_solve(&gtg, &gtt, fallback_ridge)
                .ok_or(ClassifierError::SingularSystem)?;
            (w, fallback_ridge, true)
        }
    };

    debug_assert_eq!(weights.nrows(), n);
    let weights = (0..n)
        .map(|i| (0..dataset.class_count()).map(|k| weights[(i, k)]).collect())
        .collect();
    Ok(LinearModel {
        mode,
        standardizer,
        weights,
        class_count: dataset.class_count(),
        ridge: effective_ridge,
        ridge_fallback: fallback,
    })
}

/// Per-class scores for one input.
pub fn scores(model: &LinearModel, x: &[f64]) -> Result<Vec<f64>, ClassifierError> {
    if x.len() != model.feature_len() {
        return Err(ClassifierError::InvalidInput(format!(
            "input has {} features, model expects {}",
            x.len(),
            model.feature_len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ClassifierError::InvalidInput(
            "input contains a non-finite value".into(),
        ));
    }
    let g = design_row(model.mode, &model.standardizer, x);
    Ok((0..model.class_count)
        .map(|k| g.iter().zip(&model.weights).map(|(gi, row)| gi * row[k]).sum())
        .collect())
}

/// Predicted class index: the argmax of the scores, ties to the lowest
/// index.
pub fn predict(model: &LinearModel, x: &[f64]) -> Result<usize, ClassifierError> {
    let y = scores(model, x)?;
    let mut best = 0;
    for (k, &v) in y.iter().enumerate().skip(1) {
        if v > y[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Number of misclassified patterns.
pub fn error_count(model: &LinearModel, dataset: &LabeledDataset) -> Result<usize, ClassifierError> {
    if dataset.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    let mut errors = 0;
    for (x, &label) in dataset.features().iter().zip(dataset.labels()) {
        if predict(model, x)? != label {
            errors += 1;
        }
    }
    Ok(errors)
}

/// Fraction of misclassified patterns in `[0, 1]`.
pub fn error_rate(model: &LinearModel, dataset: &LabeledDataset) -> Result<f64, ClassifierError> {
    Ok(error_count(model, dataset)? as f64 / dataset.len() as f64)
}
