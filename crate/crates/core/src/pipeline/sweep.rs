use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{stage_rows, PipelineError, StageId};
use crate::eval::{ci99, cross_val_scores, mean};
use crate::features::{build_matrix, render_real, FeatureSpec};
use crate::flow::Flow;
use crate::learners::{AlgorithmId, Hyperparams};
use crate::scalar::Scalar;
use crate::seed::derive_path;

/// Folds of the sweep's cross-validation.
pub const SWEEP_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: String,
    pub n: usize,
    pub algorithm: AlgorithmId,
    pub scores: Vec<f64>,
    pub mean: f64,
    pub ci99: f64,
}

/// Stratified 5-fold CV with default hyperparameters for every
/// (family, N, algorithm) cell, in that nesting order. `families` pairs a
/// display name with a spec whose N-first lengths are replaced by each N.
/// All cells share the same folds.
pub fn feature_sweep<T: Scalar>(
    flows: &[Flow],
    stage: StageId,
    families: &[(String, FeatureSpec)],
    n_values: &[usize],
    algorithms: &[AlgorithmId],
    seed: u64,
) -> Result<Vec<SweepRow>, PipelineError> {
    let labels: Vec<_> = flows.iter().map(|f| f.labels.clone()).collect();
    let (rows, y) = stage_rows(&labels, stage)?;
    let subset: Vec<&Flow> = rows.iter().map(|&i| &flows[i]).collect();
    let pool: Vec<usize> = (0..subset.len()).collect();
    let metric = stage.metric();
    let mut out = Vec::new();
    for (name, spec) in families {
        for &n in n_values {
            let x = build_matrix::<T, _>(&subset, &spec.with_n(n))?;
            for &alg in algorithms {
                let scores = cross_val_scores(
                    &Hyperparams::default_for(alg),
                    &x,
                    &y,
                    &pool,
                    SWEEP_FOLDS,
                    &metric,
                    derive_path(seed, &[0]),
                )?;
                out.push(SweepRow {
                    family: name.clone(),
                    n,
                    algorithm: alg,
                    mean: mean(&scores),
                    ci99: ci99(&scores),
                    scores,
                });
            }
        }
    }
    Ok(out)
}

/// Writes `family,n,algorithm,mean,ci99`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| PipelineError::Io(e.into());
    w.write_record(["family", "n", "algorithm", "mean", "ci99"])
        .map_err(io)?;
    for r in rows {
        w.write_record([
            r.family.as_str(),
            &r.n.to_string(),
            r.algorithm.short_name(),
            &render_real(r.mean),
            &render_real(r.ci99),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
