//! Classifiers: CART, random forest, Gaussian naive Bayes, k-nearest
//! neighbours, one-vs-rest SGD linear models and SAMME AdaBoost.
//!
//! All learners are fitted through [`fit`], which returns an immutable
//! [`TrainedModel`]. Labels are strings; the class list is the sorted set of
//! training labels and prediction ties resolve to the lowest class index.

mod adaboost;
mod forest;
mod knn;
mod linear;
mod naive_bayes;
mod params;
mod scaler;
mod tree;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adaboost::AdaBoost;
pub use forest::Forest;
pub use knn::Knn;
pub use linear::{sigmoid, LinearSgd, Loss};
pub use naive_bayes::GaussianNb;
pub use params::{AlgorithmId, Criterion, ForestParams, Hyperparams, MaxFeatures, SgdParams, TreeParams};
pub use scaler::Standardizer;
pub use tree::Tree;

use crate::features::FeatureMatrix;
use crate::scalar::Scalar;
use tree::{argmax, Builder};

/// Version tag of the model JSON document.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("training labels contain a single class `{0}`")]
    DegenerateTraining(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("{0} does not expose impurity-based importances")]
    UnsupportedModel(AlgorithmId),
    #[error("model document: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum Fitted<T> {
    Tree(Tree<T>),
    Forest(Forest<T>),
    GaussianNb(GaussianNb<T>),
    Knn(Knn<T>),
    Linear(LinearSgd<T>),
    AdaBoost(AdaBoost<T>),
}

/// A fitted classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrainedModel<T> {
    pub params: Hyperparams,
    pub classes: Vec<String>,
    pub n_features: usize,
    pub seed: u64,
    pub fitted: Fitted<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ModelDocument<T> {
    format_version: u32,
    model: TrainedModel<T>,
}

/// Fits `params` on `x` / `y`. Deterministic in `(x, y, params, seed)`.
pub fn fit<T: Scalar, S: AsRef<str>>(
    params: &Hyperparams,
    x: &FeatureMatrix<T>,
    y: &[S],
    seed: u64,
) -> Result<TrainedModel<T>, LearnError> {
    params.validate()?;
    if x.n_rows() != y.len() {
        return Err(LearnError::InvalidInput(format!(
            "{} rows but {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    if x.n_rows() < 2 || x.n_cols() == 0 {
        return Err(LearnError::InvalidInput("need at least 2 rows and 1 feature".into()));
    }
    if x.rows().any(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(LearnError::InvalidInput("non-finite feature value".into()));
    }
    let classes: Vec<String> = y
        .iter()
        .map(|s| s.as_ref().to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() < 2 {
        return Err(LearnError::DegenerateTraining(
            classes.into_iter().next().unwrap_or_default(),
        ));
    }
    let yi: Vec<usize> = y
        .iter()
        .map(|s| classes.binary_search_by(|c| c.as_str().cmp(s.as_ref())).expect("known"))
        .collect();
    let k = classes.len();
    let fitted = match params {
        Hyperparams::DecisionTree(tp) => {
            let w = vec![1.0; yi.len()];
            let b = Builder {
                x,
                y: &yi,
                weights: &w,
                n_classes: k,
                params: *tp,
                max_features: usize::MAX,
            };
            Fitted::Tree(b.build((0..yi.len()).collect(), None))
        }
        Hyperparams::RandomForest(fp) => Fitted::Forest(Forest::fit(x, &yi, k, fp, seed)),
        Hyperparams::GaussianNb { var_smoothing } => Fitted::GaussianNb(GaussianNb::fit(x, &yi, k, *var_smoothing)),
        Hyperparams::Knn { n_neighbors } => Fitted::Knn(Knn::fit(x, &yi, *n_neighbors)),
        Hyperparams::LinearSgdHinge(sp) => Fitted::Linear(LinearSgd::fit(x, &yi, k, Loss::Hinge, sp, seed)),
        Hyperparams::LinearSgdLog(sp) => Fitted::Linear(LinearSgd::fit(x, &yi, k, Loss::Log, sp, seed)),
        Hyperparams::AdaBoost {
            learning_rate,
            n_estimators,
        } => Fitted::AdaBoost(AdaBoost::fit(x, &yi, k, *learning_rate, *n_estimators)),
    };
    Ok(TrainedModel {
        params: *params,
        classes,
        n_features: x.n_cols(),
        seed,
        fitted,
    })
}

impl<T: Scalar> TrainedModel<T> {
    pub fn algorithm(&self) -> AlgorithmId {
        self.params.algorithm()
    }

    fn check_width(&self, x: &FeatureMatrix<T>) -> Result<(), LearnError> {
        if x.n_cols() != self.n_features {
            return Err(LearnError::InvalidInput(format!(
                "model expects {} features, got {}",
                self.n_features,
                x.n_cols()
            )));
        }
        Ok(())
    }

    /// Per-class score of one row: class probabilities for trees, forests,
    /// naive Bayes and boosting, vote shares for KNN, decision values for the
    /// linear models.
    pub fn row_scores(&self, row: &[T]) -> Vec<f64> {
        let k = self.classes.len();
        match &self.fitted {
            Fitted::Tree(t) => t.proba(row),
            Fitted::Forest(f) => f.proba(row, k),
            Fitted::GaussianNb(g) => g.posterior(row).into_iter().map(Scalar::as_f64).collect(),
            Fitted::Knn(m) => m.votes(row, k),
            Fitted::Linear(l) => l.decision_function(row),
            Fitted::AdaBoost(a) => a.scores(row, k),
        }
    }

    pub fn predict_scores(&self, x: &FeatureMatrix<T>) -> Result<Vec<Vec<f64>>, LearnError> {
        self.check_width(x)?;
        Ok(x.rows().map(|r| self.row_scores(r)).collect())
    }

    /// Predicted class indices into [`TrainedModel::classes`].
    pub fn predict_indices(&self, x: &FeatureMatrix<T>) -> Result<Vec<usize>, LearnError> {
        self.check_width(x)?;
        Ok(x.rows().map(|r| argmax(&self.row_scores(r))).collect())
    }

    pub fn predict(&self, x: &FeatureMatrix<T>) -> Result<Vec<String>, LearnError> {
        Ok(self
            .predict_indices(x)?
            .into_iter()
            .map(|i| self.classes[i].clone())
            .collect())
    }

    /// Mean decrease in impurity per feature, normalized to sum 1.
    ///
    /// Forest importances are per-tree normalized and then averaged; boosted
    /// stumps are weighted by their estimator weight. A model without any
    /// split yields uniform importances.
    pub fn mdi_importance(&self) -> Result<Vec<f64>, LearnError> {
        let d = self.n_features;
        let normalized = |mut v: Vec<f64>| {
            let s: f64 = v.iter().sum();
            if s > 0.0 {
                v.iter_mut().for_each(|x| *x /= s);
            }
            v
        };
        let combine = |parts: Vec<(f64, Vec<f64>)>| {
            let mut acc = vec![0.0; d];
            let total: f64 = parts.iter().map(|(w, _)| w).sum();
            for (w, v) in parts {
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += w * x;
                }
            }
            if total > 0.0 {
                acc.iter_mut().for_each(|a| *a /= total);
            }
            acc
        };
        let raw = match &self.fitted {
            Fitted::Tree(t) => t.impurity_decrease(),
            Fitted::Forest(f) => combine(
                f.trees()
                    .iter()
                    .map(|t| (1.0, normalized(t.impurity_decrease())))
                    .collect(),
            ),
            Fitted::AdaBoost(a) => combine(
                a.stumps
                    .iter()
                    .zip(&a.stump_weights)
                    .map(|(t, &w)| (w, normalized(t.impurity_decrease())))
                    .collect(),
            ),
            _ => return Err(LearnError::UnsupportedModel(self.algorithm())),
        };
        let out = normalized(raw);
        if out.iter().sum::<f64>() > 0.0 {
            Ok(out)
        } else {
            Ok(vec![1.0 / d as f64; d])
        }
    }

    pub fn to_json(&self) -> Result<String, LearnError> {
        Ok(serde_json::to_string(&ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self, LearnError> {
        let doc: ModelDocument<T> = serde_json::from_str(s)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(LearnError::Format(format!(
                "unsupported format_version {}",
                doc.format_version
            )));
        }
        Ok(doc.model)
    }
}
