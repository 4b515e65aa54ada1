use serde::{Deserialize, Serialize};

use super::scaler::Standardizer;
use crate::features::FeatureMatrix;
use crate::scalar::Scalar;

/// Majority vote among the k nearest standardized training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Knn<T> {
    scaler: Standardizer<T>,
    train: Vec<T>,
    y: Vec<usize>,
    k: usize,
}

impl<T: Scalar> Knn<T> {
    pub(crate) fn fit(x: &FeatureMatrix<T>, y: &[usize], k: usize) -> Self {
        let scaler = Standardizer::fit(x);
        let train = scaler.transform(x).into_iter().flatten().collect();
        Knn {
            scaler,
            train,
            y: y.to_vec(),
            k,
        }
    }

    /// Vote share per class. Distance ties resolve to the earlier training
    /// row.
    pub fn votes(&self, row: &[T], n_classes: usize) -> Vec<f64> {
        let mut q = Vec::with_capacity(row.len());
        self.scaler.transform_row(row, &mut q);
        let d = q.len();
        let mut dist: Vec<(T, usize)> = self
            .train
            .chunks_exact(d.max(1))
            .enumerate()
            .map(|(i, r)| {
                let s = r.iter().zip(&q).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>();
                (s, i)
            })
            .collect();
        let k = self.k.min(dist.len());
        let cmp = |a: &(T, usize), b: &(T, usize)| a.0.partial_cmp(&b.0).expect("finite").then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
        }
        let mut votes = vec![0.0; n_classes];
        for &(_, i) in &dist[..k] {
            votes[self.y[i]] += 1.0;
        }
        votes.iter_mut().for_each(|v| *v /= k as f64);
        votes
    }
}
