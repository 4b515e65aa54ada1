use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LearnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmId {
    DecisionTree,
    RandomForest,
    GaussianNb,
    Knn,
    LinearSgdHinge,
    LinearSgdLog,
    AdaBoost,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 7] = [
        AlgorithmId::DecisionTree,
        AlgorithmId::RandomForest,
        AlgorithmId::GaussianNb,
        AlgorithmId::Knn,
        AlgorithmId::LinearSgdHinge,
        AlgorithmId::LinearSgdLog,
        AlgorithmId::AdaBoost,
    ];

    /// Display name used in reports and figures.
    pub fn short_name(self) -> &'static str {
        match self {
            AlgorithmId::DecisionTree => "DT",
            AlgorithmId::RandomForest => "RF",
            AlgorithmId::GaussianNb => "GNB",
            AlgorithmId::Knn => "KNN",
            AlgorithmId::LinearSgdHinge => "SV SGD",
            AlgorithmId::LinearSgdLog => "LR SGD",
            AlgorithmId::AdaBoost => "AB",
        }
    }

    /// Command-line token.
    pub fn cli_name(self) -> &'static str {
        match self {
            AlgorithmId::DecisionTree => "dt",
            AlgorithmId::RandomForest => "rf",
            AlgorithmId::GaussianNb => "gnb",
            AlgorithmId::Knn => "knn",
            AlgorithmId::LinearSgdHinge => "sv-sgd",
            AlgorithmId::LinearSgdLog => "lr-sgd",
            AlgorithmId::AdaBoost => "ab",
        }
    }

    pub fn is_tree_based(self) -> bool {
        matches!(
            self,
            AlgorithmId::DecisionTree | AlgorithmId::RandomForest | AlgorithmId::AdaBoost
        )
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for AlgorithmId {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '_'], "-");
        AlgorithmId::ALL
            .into_iter()
            .find(|a| a.cli_name() == norm || a.short_name().to_ascii_lowercase().replace(' ', "-") == norm)
            .ok_or_else(|| LearnError::InvalidParams(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    #[default]
    Gini,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    #[default]
    Sqrt,
    Log2,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::All => n_features,
            MaxFeatures::Sqrt => (n_features as f64).sqrt() as usize,
            MaxFeatures::Log2 => (n_features as f64).log2() as usize,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub min_samples_split: usize,
    #[serde(default)]
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            criterion: Criterion::Gini,
            min_samples_split: 2,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    #[serde(flatten)]
    pub tree: TreeParams,
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            tree: TreeParams::default(),
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdParams {
    pub alpha: f64,
    pub epochs: usize,
}

impl Default for SgdParams {
    fn default() -> Self {
        SgdParams {
            alpha: 1e-4,
            epochs: 50,
        }
    }
}

/// Hyperparameters, one variant per algorithm family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Hyperparams {
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    GaussianNb { var_smoothing: f64 },
    Knn { n_neighbors: usize },
    LinearSgdHinge(SgdParams),
    LinearSgdLog(SgdParams),
    AdaBoost { learning_rate: f64, n_estimators: usize },
}

const CRITERIA: [Criterion; 2] = [Criterion::Gini, Criterion::Entropy];
const MIN_SAMPLES_SPLIT: [usize; 7] = [2, 3, 4, 5, 10, 50, 100];

impl Hyperparams {
    pub fn algorithm(&self) -> AlgorithmId {
        match self {
            Hyperparams::DecisionTree(_) => AlgorithmId::DecisionTree,
            Hyperparams::RandomForest(_) => AlgorithmId::RandomForest,
            Hyperparams::GaussianNb { .. } => AlgorithmId::GaussianNb,
            Hyperparams::Knn { .. } => AlgorithmId::Knn,
            Hyperparams::LinearSgdHinge(_) => AlgorithmId::LinearSgdHinge,
            Hyperparams::LinearSgdLog(_) => AlgorithmId::LinearSgdLog,
            Hyperparams::AdaBoost { .. } => AlgorithmId::AdaBoost,
        }
    }

    /// Library defaults for each algorithm.
    pub fn default_for(alg: AlgorithmId) -> Self {
        match alg {
            AlgorithmId::DecisionTree => Hyperparams::DecisionTree(TreeParams::default()),
            AlgorithmId::RandomForest => Hyperparams::RandomForest(ForestParams::default()),
            AlgorithmId::GaussianNb => Hyperparams::GaussianNb { var_smoothing: 1e-9 },
            AlgorithmId::Knn => Hyperparams::Knn { n_neighbors: 5 },
            AlgorithmId::LinearSgdHinge => Hyperparams::LinearSgdHinge(SgdParams::default()),
            AlgorithmId::LinearSgdLog => Hyperparams::LinearSgdLog(SgdParams::default()),
            AlgorithmId::AdaBoost => Hyperparams::AdaBoost {
                learning_rate: 1.0,
                n_estimators: 50,
            },
        }
    }

    /// The grid explored by nested cross-validation.
    pub fn default_grid(alg: AlgorithmId) -> Vec<Hyperparams> {
        let trees = || {
            CRITERIA.into_iter().flat_map(|criterion| {
                MIN_SAMPLES_SPLIT.into_iter().map(move |min_samples_split| TreeParams {
                    criterion,
                    min_samples_split,
                    max_depth: None,
                })
            })
        };
        let alphas = || (-8..=1).map(|e| 10f64.powi(e));
        match alg {
            AlgorithmId::DecisionTree => trees().map(Hyperparams::DecisionTree).collect(),
            AlgorithmId::RandomForest => trees()
                .map(|tree| {
                    Hyperparams::RandomForest(ForestParams {
                        tree,
                        ..ForestParams::default()
                    })
                })
                .collect(),
            AlgorithmId::GaussianNb => vec![Hyperparams::default_for(alg)],
            AlgorithmId::Knn => [1, 5, 10, 50]
                .into_iter()
                .map(|n_neighbors| Hyperparams::Knn { n_neighbors })
                .collect(),
            AlgorithmId::LinearSgdHinge => alphas()
                .map(|alpha| Hyperparams::LinearSgdHinge(SgdParams { alpha, epochs: 50 }))
                .collect(),
            AlgorithmId::LinearSgdLog => alphas()
                .map(|alpha| Hyperparams::LinearSgdLog(SgdParams { alpha, epochs: 50 }))
                .collect(),
            AlgorithmId::AdaBoost => (-3..=1)
                .map(|e| Hyperparams::AdaBoost {
                    learning_rate: 10f64.powi(e),
                    n_estimators: 50,
                })
                .collect(),
        }
    }

    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::InvalidParams(m.to_string()));
        match *self {
            Hyperparams::DecisionTree(t) | Hyperparams::RandomForest(ForestParams { tree: t, .. })
                if t.min_samples_split < 2 =>
            {
                bad("min_samples_split must be at least 2")
            }
            Hyperparams::RandomForest(f) if f.n_trees == 0 => bad("n_trees must be at least 1"),
            Hyperparams::GaussianNb { var_smoothing } if !(var_smoothing >= 0.0) => {
                bad("var_smoothing must be non-negative")
            }
            Hyperparams::Knn { n_neighbors: 0 } => bad("n_neighbors must be at least 1"),
            Hyperparams::LinearSgdHinge(p) | Hyperparams::LinearSgdLog(p) if !(p.alpha > 0.0) || p.epochs == 0 => {
                bad("alpha must be positive and epochs at least 1")
            }
            Hyperparams::AdaBoost {
                learning_rate,
                n_estimators,
            } if !(learning_rate > 0.0) || n_estimators == 0 => bad("learning_rate must be positive"),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_match_reference_sizes() {
        assert_eq!(Hyperparams::default_grid(AlgorithmId::DecisionTree).len(), 14);
        assert_eq!(Hyperparams::default_grid(AlgorithmId::RandomForest).len(), 14);
        assert_eq!(Hyperparams::default_grid(AlgorithmId::Knn).len(), 4);
        assert_eq!(Hyperparams::default_grid(AlgorithmId::LinearSgdLog).len(), 10);
        assert_eq!(Hyperparams::default_grid(AlgorithmId::AdaBoost).len(), 5);
        for alg in AlgorithmId::ALL {
            for p in Hyperparams::default_grid(alg) {
                assert_eq!(p.algorithm(), alg);
                p.validate().unwrap();
            }
        }
    }

    #[test]
    fn names_parse() {
        for alg in AlgorithmId::ALL {
            assert_eq!(alg.cli_name().parse::<AlgorithmId>().unwrap(), alg);
            assert_eq!(alg.short_name().parse::<AlgorithmId>().unwrap(), alg);
        }
        assert!("xgboost".parse::<AlgorithmId>().is_err());
    }

    #[test]
    fn max_features_rules() {
        assert_eq!(MaxFeatures::Sqrt.resolve(102), 10);
        assert_eq!(MaxFeatures::All.resolve(7), 7);
        assert_eq!(MaxFeatures::Count(50).resolve(7), 7);
        assert_eq!(MaxFeatures::Log2.resolve(1), 1);
    }

    #[test]
    fn json_shape() {
        let p = Hyperparams::default_for(AlgorithmId::RandomForest);
        let s = serde_json::to_string(&p).unwrap();
        assert!(
            s.starts_with(r#"{"algorithm":"random_forest","criterion":"gini""#),
            "{s}"
        );
        assert_eq!(serde_json::from_str::<Hyperparams>(&s).unwrap(), p);
    }
}
