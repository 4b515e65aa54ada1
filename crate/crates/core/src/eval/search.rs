use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::folds::stratified_kfold;
use super::metrics::{ConfusionMatrix, Metric};
use super::EvalError;
use crate::features::FeatureMatrix;
use crate::learners::{fit, AlgorithmId, Hyperparams, TrainedModel};
use crate::scalar::Scalar;
use crate::seed::derive_path;

/// Version tag of the serialized [`EvalReport`].
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Where in a nested cross-validation a fit happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Grid search inside one outer-train split.
    Inner,
    /// Refit of the winning point on the full outer-train split.
    Refit,
}

/// Rows read by one fit-and-score step, as original row indices.
#[derive(Debug, Clone, Copy)]
pub struct Access<'a> {
    pub outer_fold: usize,
    pub phase: Phase,
    pub fit_rows: &'a [usize],
    pub score_rows: &'a [usize],
}

/// Callback invoked on every fit; used to audit data isolation.
pub type Observer<'a> = &'a (dyn Fn(&Access<'_>) + Sync);

/// Half-width of the 99% Student-t interval over `scores`; 0 for fewer than
/// two scores or identical scores.
pub fn ci99(scores: &[f64]) -> f64 {
    let k = scores.len();
    if k < 2 || all_equal(scores) {
        return 0.0;
    }
    let mean = scores.iter().sum::<f64>() / k as f64;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (k - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.995);
    t * var.sqrt() / (k as f64).sqrt()
}

/// Arithmetic mean; exact when all scores are equal.
pub fn mean(scores: &[f64]) -> f64 {
    if scores.is_empty() {
        0.0
    } else if all_equal(scores) {
        scores[0]
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}

fn all_equal(scores: &[f64]) -> bool {
    scores.windows(2).all(|w| w[0] == w[1])
}

pub(crate) fn subset<S: AsRef<str>>(y: &[S], idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| y[i].as_ref().to_string()).collect()
}

/// Fits on `train` rows and returns the model with its confusion matrix on
/// `test` rows. The matrix uses the model's class list so folds stay
/// comparable.
pub fn fit_and_score<T: Scalar, S: AsRef<str>>(
    params: &Hyperparams,
    x: &FeatureMatrix<T>,
    y: &[S],
    train: &[usize],
    test: &[usize],
    seed: u64,
) -> Result<(TrainedModel<T>, ConfusionMatrix), EvalError> {
    let model = fit(params, &x.select_rows(train), &subset(y, train), seed)?;
    let pred = model.predict(&x.select_rows(test))?;
    let truth = subset(y, test);
    let mut classes = model.classes.clone();
    for t in &truth {
        if let Err(pos) = classes.binary_search(t) {
            classes.insert(pos, t.clone());
        }
    }
    Ok((model, ConfusionMatrix::with_classes(classes, &truth, &pred)))
}

/// Plain k-fold cross-validation over the rows in `pool`; returns one score
/// per fold in fold order.
pub fn cross_val_scores<T: Scalar, S: AsRef<str> + Sync>(
    params: &Hyperparams,
    x: &FeatureMatrix<T>,
    y: &[S],
    pool: &[usize],
    k: usize,
    metric: &Metric,
    seed: u64,
) -> Result<Vec<f64>, EvalError> {
    cv_inner(params, x, y, pool, k, metric, seed, None, 0)
}

#[allow(clippy::too_many_arguments)]
fn cv_inner<T: Scalar, S: AsRef<str> + Sync>(
    params: &Hyperparams,
    x: &FeatureMatrix<T>,
    y: &[S],
    pool: &[usize],
    k: usize,
    metric: &Metric,
    seed: u64,
    observer: Option<Observer<'_>>,
    outer_fold: usize,
) -> Result<Vec<f64>, EvalError> {
    let pool_y = subset(y, pool);
    let folds: Vec<Vec<usize>> = stratified_kfold(&pool_y, k, derive_path(seed, &[0]))?
        .into_iter()
        .map(|f| f.into_iter().map(|p| pool[p]).collect())
        .collect();
    (0..k)
        .into_par_iter()
        .map(|f| {
            let test = &folds[f];
            let train: Vec<usize> = {
                let mut t: Vec<usize> = folds
                    .iter()
                    .enumerate()
                    .filter(|&(g, _)| g != f)
                    .flat_map(|(_, v)| v.iter().copied())
                    .collect();
                t.sort_unstable();
                t
            };
            if let Some(obs) = observer {
                obs(&Access {
                    outer_fold,
                    phase: Phase::Inner,
                    fit_rows: &train,
                    score_rows: test,
                });
            }
            let (_, cm) = fit_and_score(params, x, y, &train, test, derive_path(seed, &[1, f as u64]))?;
            Ok(metric.score(&cm))
        })
        .collect()
}

/// Mean inner-CV score per grid point, in grid order.
pub fn grid_scores<T: Scalar, S: AsRef<str> + Sync>(
    grid: &[Hyperparams],
    x: &FeatureMatrix<T>,
    y: &[S],
    pool: &[usize],
    inner_k: usize,
    metric: &Metric,
    seed: u64,
) -> Result<Vec<f64>, EvalError> {
    grid_inner(grid, x, y, pool, inner_k, metric, seed, None, 0)
}

#[allow(clippy::too_many_arguments)]
fn grid_inner<T: Scalar, S: AsRef<str> + Sync>(
    grid: &[Hyperparams],
    x: &FeatureMatrix<T>,
    y: &[S],
    pool: &[usize],
    inner_k: usize,
    metric: &Metric,
    seed: u64,
    observer: Option<Observer<'_>>,
    outer_fold: usize,
) -> Result<Vec<f64>, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::InvalidInput("empty hyperparameter grid".into()));
    }
    // every grid point sees the same inner folds
    grid.par_iter()
        .map(|p| cv_inner(p, x, y, pool, inner_k, metric, seed, observer, outer_fold).map(|s| mean(&s)))
        .collect()
}

fn best_index(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Returns the grid point with the highest mean inner-CV score over all rows;
/// ties go to the earliest point.
pub fn grid_search<T: Scalar, S: AsRef<str> + Sync>(
    grid: &[Hyperparams],
    x: &FeatureMatrix<T>,
    y: &[S],
    inner_k: usize,
    metric: &Metric,
    seed: u64,
) -> Result<Hyperparams, EvalError> {
    let pool: Vec<usize> = (0..y.len()).collect();
    let scores = grid_scores(grid, x, y, &pool, inner_k, metric, seed)?;
    Ok(grid[best_index(&scores)])
}

/// Settings of a nested cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedCv {
    pub outer_k: usize,
    pub inner_k: usize,
    pub metric: Metric,
    pub seed: u64,
}

impl NestedCv {
    pub fn new(metric: Metric, seed: u64) -> Self {
        NestedCv {
            outer_k: 5,
            inner_k: 3,
            metric,
            seed,
        }
    }
}

/// Outcome of a nested cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub algorithm: AlgorithmId,
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_spec: Option<String>,
    pub seed: u64,
    pub outer_k: usize,
    pub inner_k: usize,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    pub ci99: f64,
    pub chosen_params: Vec<Hyperparams>,
    pub confusion: Vec<ConfusionMatrix>,
}

impl EvalReport {
    pub fn with_feature_spec(mut self, name: impl Into<String>) -> Self {
        self.feature_spec = Some(name.into());
        self
    }
}

/// Nested cross-validation: for each outer fold, grid-search on the outer
/// train split, refit the winner there and score it on the outer test split.
pub fn nested_cv<T: Scalar, S: AsRef<str> + Sync>(
    grid: &[Hyperparams],
    x: &FeatureMatrix<T>,
    y: &[S],
    cfg: &NestedCv,
    observer: Option<Observer<'_>>,
) -> Result<EvalReport, EvalError> {
    let algorithm = grid
        .first()
        .ok_or_else(|| EvalError::InvalidInput("empty hyperparameter grid".into()))?
        .algorithm();
    if grid.iter().any(|p| p.algorithm() != algorithm) {
        return Err(EvalError::InvalidInput("grid mixes algorithms".into()));
    }
    if x.n_rows() != y.len() {
        return Err(EvalError::InvalidInput(format!(
            "{} rows but {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    let outer = stratified_kfold(y, cfg.outer_k, derive_path(cfg.seed, &[0]))?;
    let per_fold: Vec<(f64, Hyperparams, ConfusionMatrix)> = (0..cfg.outer_k)
        .into_par_iter()
        .map(|f| {
            let test = &outer[f];
            let mut train: Vec<usize> = outer
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, v)| v.iter().copied())
                .collect();
            train.sort_unstable();
            let scores = grid_inner(
                grid,
                x,
                y,
                &train,
                cfg.inner_k,
                &cfg.metric,
                derive_path(cfg.seed, &[1, f as u64]),
                observer,
                f,
            )?;
            let best = grid[best_index(&scores)];
            if let Some(obs) = observer {
                obs(&Access {
                    outer_fold: f,
                    phase: Phase::Refit,
                    fit_rows: &train,
                    score_rows: test,
                });
            }
            let (_, cm) = fit_and_score(&best, x, y, &train, test, derive_path(cfg.seed, &[2, f as u64]))?;
            Ok((cfg.metric.score(&cm), best, cm))
        })
        .collect::<Result<_, EvalError>>()?;
    let fold_scores: Vec<f64> = per_fold.iter().map(|p| p.0).collect();
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        algorithm,
        metric: cfg.metric.name().to_string(),
        feature_spec: None,
        seed: cfg.seed,
        outer_k: cfg.outer_k,
        inner_k: cfg.inner_k,
        mean: mean(&fold_scores),
        ci99: ci99(&fold_scores),
        chosen_params: per_fold.iter().map(|p| p.1).collect(),
        confusion: per_fold.into_iter().map(|p| p.2).collect(),
        fold_scores,
    })
}
