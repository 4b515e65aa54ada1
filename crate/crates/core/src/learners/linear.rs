use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::params::SgdParams;
use super::scaler::Standardizer;
use crate::features::FeatureMatrix;
use crate::scalar::Scalar;
use crate::seed::{derive_seed, rng_for};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Hinge,
    Log,
}

impl Loss {
    /// Derivative of the loss with respect to the decision value `p` for a
    /// target `y` in {-1, +1}.
    fn dloss(self, p: f64, y: f64) -> f64 {
        let z = p * y;
        match self {
            Loss::Hinge => {
                if z <= 1.0 {
                    -y
                } else {
                    0.0
                }
            }
            Loss::Log => {
                if z > 18.0 {
                    -y * (-z).exp()
                } else if z < -18.0 {
                    -y
                } else {
                    -y / (z.exp() + 1.0)
                }
            }
        }
    }
}

/// One-vs-rest linear models trained by plain SGD with L2 penalty and the
/// `1 / (alpha * (t + t0))` step schedule on standardized inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LinearSgd<T> {
    loss: Loss,
    scaler: Standardizer<T>,
    /// `n_classes * n_features`.
    weights: Vec<T>,
    intercepts: Vec<T>,
}

impl<T: Scalar> LinearSgd<T> {
    pub(crate) fn fit(
        x: &FeatureMatrix<T>,
        y: &[usize],
        n_classes: usize,
        loss: Loss,
        params: &SgdParams,
        seed: u64,
    ) -> Self {
        let scaler = Standardizer::fit(x);
        let z = scaler.transform(x);
        let d = x.n_cols();
        let alpha = params.alpha;
        let typw = (1.0 / alpha.sqrt()).sqrt();
        let eta0 = typw / loss.dloss(-typw, 1.0).abs().max(1.0);
        let t0 = 1.0 / (eta0 * alpha);

        let mut weights = Vec::with_capacity(n_classes * d);
        let mut intercepts = Vec::with_capacity(n_classes);
        for c in 0..n_classes {
            let mut rng = rng_for(derive_seed(seed, c as u64));
            let mut w = vec![0.0f64; d];
            let mut b = 0.0f64;
            let mut order: Vec<usize> = (0..z.len()).collect();
            let mut t = 0.0;
            for _ in 0..params.epochs {
                order.shuffle(&mut rng);
                for &i in &order {
                    let target = if y[i] == c { 1.0 } else { -1.0 };
                    let eta = 1.0 / (alpha * (t0 + t));
                    let p = w.iter().zip(&z[i]).map(|(wj, xj)| wj * xj.as_f64()).sum::<f64>() + b;
                    let g = loss.dloss(p, target);
                    let decay = (1.0 - eta * alpha).max(0.0);
                    for (wj, xj) in w.iter_mut().zip(&z[i]) {
                        *wj = *wj * decay - eta * g * xj.as_f64();
                    }
                    b -= eta * g;
                    t += 1.0;
                }
            }
            weights.extend(w.into_iter().map(T::of));
            intercepts.push(T::of(b));
        }
        LinearSgd {
            loss,
            scaler,
            weights,
            intercepts,
        }
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    /// Signed distance to each class's hyperplane.
    pub fn decision_function(&self, row: &[T]) -> Vec<f64> {
        let mut z = Vec::with_capacity(row.len());
        self.scaler.transform_row(row, &mut z);
        let d = z.len();
        self.intercepts
            .iter()
            .enumerate()
            .map(|(c, &b)| {
                self.weights[c * d..(c + 1) * d]
                    .iter()
                    .zip(&z)
                    .map(|(&w, &x)| (w * x).as_f64())
                    .sum::<f64>()
                    + b.as_f64()
            })
            .collect()
    }
}

/// Logistic link used to read log-loss decision values as probabilities.
pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}
