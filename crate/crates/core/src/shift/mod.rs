//! Domain-shift experiments: train on one dataset or MTU stratum and score
//! on another.
//!
//! Every cell trains on a stratified 70 % of the training domain. The
//! diagonal cell (train domain = test domain) is scored on the held-out
//! 30 %; off-diagonal cells are scored on every stage row of the test
//! domain. Each cell is repeated with [`SHIFT_REPEATS`] seeds.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{ci99, mean, stratified_split, ConfusionMatrix, EvalError};
use crate::features::{build_matrix, render_real, FeatureError, FeatureSpec};
use crate::flow::Flow;
use crate::learners::{fit, AlgorithmId, Hyperparams, LearnError};
use crate::pipeline::{stage_rows, PipelineError, StageId};
use crate::seed::derive_path;

/// Seed repeats per cell.
pub const SHIFT_REPEATS: usize = 5;
/// Held-out fraction of the training domain.
pub const SHIFT_TEST_FRACTION: f64 = 0.3;
pub const SHIFT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ShiftError {
    #[error("domain `{domain}` has {classes} class(es) for stage {stage}; at least 2 are needed")]
    DegenerateDomain {
        domain: String,
        stage: StageId,
        classes: usize,
    },
    #[error("corpus has no flows labeled with mtu {0}")]
    MissingStratum(u16),
    #[error("no feature specs given")]
    NoSpecs,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftAxis {
    Dataset,
    Mtu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftCell {
    pub spec: String,
    pub train: String,
    pub test: String,
    pub scores: Vec<f64>,
    pub mean: f64,
    pub ci99: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub schema_version: u32,
    pub axis: ShiftAxis,
    pub stage: StageId,
    pub algorithm: AlgorithmId,
    pub params: Hyperparams,
    pub metric: String,
    pub seed: u64,
    pub repeats: usize,
    pub test_fraction: f64,
    pub cells: Vec<ShiftCell>,
}

impl ShiftReport {
    pub fn cell(&self, spec: &str, train: &str, test: &str) -> Option<&ShiftCell> {
        self.cells
            .iter()
            .find(|c| c.spec == spec && c.train == train && c.test == test)
    }

    /// In-domain mean minus the mean on `test`.
    pub fn score_drop(&self, spec: &str, train: &str, test: &str) -> Option<f64> {
        Some(self.cell(spec, train, train)?.mean - self.cell(spec, train, test)?.mean)
    }

    /// Whether the in-domain cell is at least as high as every other cell
    /// of the same (spec, train) row.
    pub fn diagonal_is_max(&self, spec: &str, train: &str) -> Option<bool> {
        let diag = self.cell(spec, train, train)?.mean;
        Some(
            self.cells
                .iter()
                .filter(|c| c.spec == spec && c.train == train)
                .all(|c| c.mean <= diag),
        )
    }

    /// Test domains in order of first appearance.
    pub fn test_domains(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.test.as_str()) {
                out.push(&c.test);
            }
        }
        out
    }

    /// Writes `spec,train,<test...>` with cell means; absent cells are empty.
    pub fn write_pivot_csv<W: Write>(&self, out: W) -> Result<(), ShiftError> {
        let tests = self.test_domains();
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| ShiftError::Io(e.into());
        let mut header = vec!["spec".to_string(), "train".to_string()];
        header.extend(tests.iter().map(|t| t.to_string()));
        w.write_record(&header).map_err(io)?;
        let mut rows: Vec<(&str, &str)> = Vec::new();
        for c in &self.cells {
            if !rows.contains(&(c.spec.as_str(), c.train.as_str())) {
                rows.push((&c.spec, &c.train));
            }
        }
        for (spec, train) in rows {
            let mut rec = vec![spec.to_string(), train.to_string()];
            rec.extend(tests.iter().map(|t| {
                self.cell(spec, train, t)
                    .map(|c| render_real(c.mean))
                    .unwrap_or_default()
            }));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Domain<'a> {
    tag: String,
    flows: Vec<&'a Flow>,
    y: Vec<String>,
}

impl<'a> Domain<'a> {
    fn new(tag: String, flows: Vec<&'a Flow>, stage: StageId) -> Result<Self, ShiftError> {
        let labels: Vec<_> = flows.iter().map(|f| f.labels.clone()).collect();
        let (rows, y) = match stage_rows(&labels, stage) {
            Ok(r) => r,
            Err(PipelineError::DegenerateStage { classes, .. }) => {
                return Err(ShiftError::DegenerateDomain {
                    domain: tag,
                    stage,
                    classes,
                })
            }
            Err(e) => return Err(e.into()),
        };
        let flows = rows.iter().map(|&i| flows[i]).collect();
        Ok(Domain { tag, flows, y })
    }
}

struct Plan<'p> {
    stage: StageId,
    specs: &'p [(String, FeatureSpec)],
    params: &'p Hyperparams,
    seed: u64,
}

fn pick<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

/// Cells for each `train` domain against every domain in `domains`.
fn shift_cells(domains: &[Domain<'_>], train: &[usize], plan: &Plan<'_>) -> Result<Vec<ShiftCell>, ShiftError> {
    if plan.specs.is_empty() {
        return Err(ShiftError::NoSpecs);
    }
    let metric = plan.stage.metric();
    let mut cells = Vec::new();
    for (spec_name, spec) in plan.specs {
        let matrices = domains
            .iter()
            .map(|d| build_matrix::<f64, _>(&d.flows, spec))
            .collect::<Result<Vec<_>, _>>()?;
        for &ti in train {
            let src = &domains[ti];
            let mut scores = vec![Vec::with_capacity(SHIFT_REPEATS); domains.len()];
            for r in 0..SHIFT_REPEATS as u64 {
                let (fit_rows, held_out) =
                    stratified_split(&src.y, SHIFT_TEST_FRACTION, derive_path(plan.seed, &[ti as u64, r, 0]))?;
                let model = fit(
                    plan.params,
                    &matrices[ti].select_rows(&fit_rows),
                    &pick(&src.y, &fit_rows),
                    derive_path(plan.seed, &[ti as u64, r, 1]),
                )?;
                for (di, d) in domains.iter().enumerate() {
                    let (pred, truth) = if di == ti {
                        (
                            model.predict(&matrices[di].select_rows(&held_out))?,
                            pick(&d.y, &held_out),
                        )
                    } else {
                        (model.predict(&matrices[di])?, d.y.clone())
                    };
                    scores[di].push(metric.score(&ConfusionMatrix::from_labels(&truth, &pred)));
                }
            }
            for (d, s) in domains.iter().zip(scores) {
                cells.push(ShiftCell {
                    spec: spec_name.clone(),
                    train: src.tag.clone(),
                    test: d.tag.clone(),
                    mean: mean(&s),
                    ci99: ci99(&s),
                    scores: s,
                });
            }
        }
    }
    Ok(cells)
}

fn report(axis: ShiftAxis, plan: &Plan<'_>, cells: Vec<ShiftCell>) -> ShiftReport {
    ShiftReport {
        schema_version: SHIFT_SCHEMA_VERSION,
        axis,
        stage: plan.stage,
        algorithm: plan.params.algorithm(),
        params: *plan.params,
        metric: plan.stage.metric().name().to_string(),
        seed: plan.seed,
        repeats: SHIFT_REPEATS,
        test_fraction: SHIFT_TEST_FRACTION,
        cells,
    }
}

/// Detection across two datasets, in both directions.
pub fn cross_domain_eval(
    a: (&str, &[Flow]),
    b: (&str, &[Flow]),
    specs: &[(String, FeatureSpec)],
    params: &Hyperparams,
    seed: u64,
) -> Result<ShiftReport, ShiftError> {
    let stage = StageId::Detection;
    let domains = [
        Domain::new(a.0.to_string(), a.1.iter().collect(), stage)?,
        Domain::new(b.0.to_string(), b.1.iter().collect(), stage)?,
    ];
    let plan = Plan {
        stage,
        specs,
        params,
        seed,
    };
    let cells = shift_cells(&domains, &[0, 1], &plan)?;
    Ok(report(ShiftAxis::Dataset, &plan, cells))
}

/// Trains on the `train_mtu` stratum of `corpus` and scores every MTU in
/// `test_mtus` (the training MTU is added first when absent).
pub fn mtu_matrix(
    corpus: &[Flow],
    train_mtu: u16,
    test_mtus: &[u16],
    specs: &[(String, FeatureSpec)],
    stage: StageId,
    params: &Hyperparams,
    seed: u64,
) -> Result<ShiftReport, ShiftError> {
    let mut mtus = vec![train_mtu];
    mtus.extend(test_mtus.iter().filter(|&&m| m != train_mtu));
    let domains = mtus
        .iter()
        .map(|&m| {
            let flows: Vec<&Flow> = corpus.iter().filter(|f| f.labels.mtu == Some(m)).collect();
            if flows.is_empty() {
                return Err(ShiftError::MissingStratum(m));
            }
            Domain::new(m.to_string(), flows, stage)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let plan = Plan {
        stage,
        specs,
        params,
        seed,
    };
    let mut cells = shift_cells(&domains, &[0], &plan)?;
    // keep the caller's column order, training MTU first when it was absent
    if test_mtus.contains(&train_mtu) {
        let order: Vec<String> = test_mtus.iter().map(|m| m.to_string()).collect();
        cells.sort_by_key(|c| {
            (
                specs.iter().position(|(n, _)| *n == c.spec),
                order.iter().position(|t| *t == c.test),
            )
        });
    }
    Ok(report(ShiftAxis::Mtu, &plan, cells))
}

#[cfg(test)]
mod tests;
