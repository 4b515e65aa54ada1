use serde::{Deserialize, Serialize};

use super::params::TreeParams;
use super::tree::{Builder, Tree};
use crate::features::FeatureMatrix;
use crate::scalar::Scalar;

/// Multi-class AdaBoost (SAMME) over depth-1 trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AdaBoost<T> {
    pub(crate) stumps: Vec<Tree<T>>,
    pub(crate) stump_weights: Vec<f64>,
}

impl<T: Scalar> AdaBoost<T> {
    pub(crate) fn fit(
        x: &FeatureMatrix<T>,
        y: &[usize],
        n_classes: usize,
        learning_rate: f64,
        n_estimators: usize,
    ) -> Self {
        let n = y.len();
        let mut w = vec![1.0 / n as f64; n];
        let k = n_classes as f64;
        let params = TreeParams {
            max_depth: Some(1),
            ..TreeParams::default()
        };
        let mut stumps = Vec::new();
        let mut stump_weights = Vec::new();
        for _ in 0..n_estimators {
            let builder = Builder {
                x,
                y,
                weights: &w,
                n_classes,
                params,
                max_features: usize::MAX,
            };
            let stump = builder.build((0..n).collect(), None);
            let miss: Vec<bool> = (0..n).map(|i| stump.predict_row(x.row(i)) != y[i]).collect();
            let total: f64 = w.iter().sum();
            let err = miss.iter().zip(&w).filter(|(m, _)| **m).map(|(_, w)| w).sum::<f64>() / total;
            if err <= 0.0 {
                stumps.push(stump);
                stump_weights.push(1.0);
                break;
            }
            if err >= 1.0 - 1.0 / k {
                if stumps.is_empty() {
                    stumps.push(stump);
                    stump_weights.push(1.0);
                }
                break;
            }
            let alpha = learning_rate * (((1.0 - err) / err).ln() + (k - 1.0).ln());
            for (wi, &m) in w.iter_mut().zip(&miss) {
                if m {
                    *wi *= alpha.exp();
                }
            }
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            stumps.push(stump);
            stump_weights.push(alpha);
        }
        AdaBoost { stumps, stump_weights }
    }

    /// Normalized weighted votes per class.
    pub fn scores(&self, row: &[T], n_classes: usize) -> Vec<f64> {
        let mut s = vec![0.0; n_classes];
        for (stump, &a) in self.stumps.iter().zip(&self.stump_weights) {
            s[stump.predict_row(row)] += a;
        }
        let total: f64 = self.stump_weights.iter().sum();
        if total > 0.0 {
            s.iter_mut().for_each(|v| *v /= total);
        }
        s
    }

    pub fn n_stumps(&self) -> usize {
        self.stumps.len()
    }
}
