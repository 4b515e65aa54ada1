//! Metrics, stratified folds, grid search, nested cross-validation and
//! learning curves.

mod curve;
mod folds;
mod metrics;
mod search;

use std::io::Write;

use thiserror::Error;

pub use curve::{learning_curve, CurvePoint, CURVE_REPEATS};
pub use folds::{stratified_kfold, stratified_split, stratified_subsample};
pub use metrics::{f1_binary, f1_macro, ConfusionMatrix, Metric};
pub use search::{
    ci99, cross_val_scores, fit_and_score, grid_scores, grid_search, mean, nested_cv, Access, EvalReport, NestedCv,
    Observer, Phase, REPORT_SCHEMA_VERSION,
};

use crate::features::render_real;
use crate::learners::LearnError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("class `{class}` has {count} rows, fewer than the {k} folds requested")]
    Stratification { class: String, count: usize, k: usize },
    #[error("training size {size} is outside 1..={available}")]
    InvalidSize { size: usize, available: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Writes the `algorithm,feature_spec,metric,mean,ci99` summary table.
pub fn write_summary_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["algorithm", "feature_spec", "metric", "mean", "ci99"])?;
    for r in reports {
        w.write_record([
            r.algorithm.short_name(),
            r.feature_spec.as_deref().unwrap_or(""),
            &r.metric,
            &render_real(r.mean),
            &render_real(r.ci99),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests;
