use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{stratified_split, stratified_subsample};
use super::metrics::Metric;
use super::search::{ci99, fit_and_score, mean};
use super::EvalError;
use crate::features::FeatureMatrix;
use crate::learners::Hyperparams;
use crate::scalar::Scalar;
use crate::seed::derive_path;

/// Repeats per training size.
pub const CURVE_REPEATS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub size: usize,
    pub scores: Vec<f64>,
    pub mean: f64,
    pub ci99: f64,
}

/// Scores `params` trained on stratified subsamples of increasing size; the
/// held-out test split is fixed across sizes and repeats.
pub fn learning_curve<T: Scalar, S: AsRef<str> + Sync>(
    params: &Hyperparams,
    x: &FeatureMatrix<T>,
    y: &[S],
    train_sizes: &[usize],
    test_fraction: f64,
    metric: &Metric,
    seed: u64,
) -> Result<Vec<CurvePoint>, EvalError> {
    let (train, test) = stratified_split(y, test_fraction, derive_path(seed, &[0]))?;
    let mut sizes = train_sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    if let Some(&bad) = sizes.iter().find(|&&s| s == 0 || s > train.len()) {
        return Err(EvalError::InvalidSize {
            size: bad,
            available: train.len(),
        });
    }
    sizes
        .iter()
        .map(|&size| {
            let scores = (0..CURVE_REPEATS)
                .into_par_iter()
                .map(|r| {
                    let path = [1, size as u64, r as u64];
                    let rows = stratified_subsample(y, &train, size, derive_path(seed, &path))?;
                    let (_, cm) = fit_and_score(
                        params,
                        x,
                        y,
                        &rows,
                        &test,
                        derive_path(seed, &[2, size as u64, r as u64]),
                    )?;
                    Ok(metric.score(&cm))
                })
                .collect::<Result<Vec<f64>, EvalError>>()?;
            Ok(CurvePoint {
                size,
                mean: mean(&scores),
                ci99: ci99(&scores),
                scores,
            })
        })
        .collect()
}
