use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::scalar::Scalar;

/// Per-class axis-aligned Gaussian model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GaussianNb<T> {
    /// `n_classes * n_features`.
    means: Vec<T>,
    vars: Vec<T>,
    log_priors: Vec<T>,
    epsilon: T,
}

impl<T: Scalar> GaussianNb<T> {
    /// Variances are smoothed by `var_smoothing` times the largest feature
    /// variance of the whole training set.
    pub(crate) fn fit(x: &FeatureMatrix<T>, y: &[usize], n_classes: usize, var_smoothing: f64) -> Self {
        let d = x.n_cols();
        let n = x.n_rows();
        let mut counts = vec![0usize; n_classes];
        let mut means = vec![T::zero(); n_classes * d];
        for (i, row) in x.rows().enumerate() {
            let c = y[i];
            counts[c] += 1;
            for (m, &v) in means[c * d..(c + 1) * d].iter_mut().zip(row) {
                *m = *m + v;
            }
        }
        for c in 0..n_classes {
            let k = T::of(counts[c].max(1) as f64);
            means[c * d..(c + 1) * d].iter_mut().for_each(|m| *m = *m / k);
        }
        let mut vars = vec![T::zero(); n_classes * d];
        for (i, row) in x.rows().enumerate() {
            let c = y[i];
            for j in 0..d {
                let diff = row[j] - means[c * d + j];
                vars[c * d + j] = vars[c * d + j] + diff * diff;
            }
        }
        for c in 0..n_classes {
            let k = T::of(counts[c].max(1) as f64);
            vars[c * d..(c + 1) * d].iter_mut().for_each(|v| *v = *v / k);
        }

        let nt = T::of(n as f64);
        let mut max_var = T::zero();
        for j in 0..d {
            let mean = x.rows().map(|r| r[j]).sum::<T>() / nt;
            let var = x.rows().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<T>() / nt;
            max_var = max_var.max(var);
        }
        let mut epsilon = T::of(var_smoothing) * max_var;
        if epsilon <= T::zero() {
            // all-constant input; keeps the log densities finite
            epsilon = T::epsilon();
        }
        vars.iter_mut().for_each(|v| *v = *v + epsilon);
        let log_priors = counts.iter().map(|&c| T::of(c as f64 / n as f64).ln()).collect();
        GaussianNb {
            means,
            vars,
            log_priors,
            epsilon,
        }
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    /// Unnormalized log posterior per class.
    pub fn joint_log_likelihood(&self, row: &[T]) -> Vec<T> {
        let d = row.len();
        let two_pi = T::of(std::f64::consts::TAU);
        let half = T::of(0.5);
        self.log_priors
            .iter()
            .enumerate()
            .map(|(c, &lp)| {
                let mut acc = lp;
                let means = &self.means[c * d..(c + 1) * d];
                let vars = &self.vars[c * d..(c + 1) * d];
                for ((&x, &m), &v) in row.iter().zip(means).zip(vars) {
                    let diff = x - m;
                    acc = acc - half * (two_pi * v).ln() - half * diff * diff / v;
                }
                acc
            })
            .collect()
    }

    /// Posterior class probabilities via log-sum-exp.
    pub fn posterior(&self, row: &[T]) -> Vec<T> {
        let jll = self.joint_log_likelihood(row);
        let max = jll.iter().copied().fold(T::neg_infinity(), T::max);
        let exp: Vec<T> = jll.iter().map(|&l| (l - max).exp()).collect();
        let total: T = exp.iter().copied().sum();
        exp.into_iter().map(|e| e / total).collect()
    }
}
