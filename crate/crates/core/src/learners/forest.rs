use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::ForestParams;
use super::tree::{Builder, Tree};
use crate::features::FeatureMatrix;
use crate::scalar::Scalar;
use crate::seed::{derive_seed, rng_for};

/// Bagged trees with per-node feature subsampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Forest<T> {
    pub(crate) trees: Vec<Tree<T>>,
}

impl<T: Scalar> Forest<T> {
    /// Trees are seeded from `seed` by index, so the result is the same for
    /// any thread count.
    pub(crate) fn fit(x: &FeatureMatrix<T>, y: &[usize], n_classes: usize, params: &ForestParams, seed: u64) -> Self {
        let n = y.len();
        let max_features = params.max_features.resolve(x.n_cols());
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng_for(derive_seed(seed, t as u64));
                let (weights, idx) = if params.bootstrap {
                    let mut w = vec![0.0; n];
                    for _ in 0..n {
                        w[rng.random_range(0..n)] += 1.0;
                    }
                    let idx = (0..n).filter(|&i| w[i] > 0.0).collect();
                    (w, idx)
                } else {
                    (vec![1.0; n], (0..n).collect())
                };
                let builder = Builder {
                    x,
                    y,
                    weights: &weights,
                    n_classes,
                    params: params.tree,
                    max_features,
                };
                builder.build(idx, Some(&mut rng))
            })
            .collect();
        Forest { trees }
    }

    /// Mean of the trees' leaf class distributions.
    pub fn proba(&self, row: &[T], n_classes: usize) -> Vec<f64> {
        let mut acc = vec![0.0; n_classes];
        for t in &self.trees {
            for (a, p) in acc.iter_mut().zip(t.proba(row)) {
                *a += p;
            }
        }
        let k = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        acc
    }

    pub fn trees(&self) -> &[Tree<T>] {
        &self.trees
    }
}
