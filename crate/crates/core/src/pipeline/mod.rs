//! The three chained decisions (tunnel detection, tunnel classification,
//! application classification inside the tunnel) and the feature sweep
//! driver.

mod chain;
mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chain::{
    run_pipeline, stage_scores, train_pipeline, write_predictions, PipelineConfig, PipelineModels, Prediction,
    StageModel, StageScore,
};
pub use sweep::{feature_sweep, write_sweep_csv, SweepRow, SWEEP_FOLDS};

use crate::eval::{EvalError, Metric};
use crate::features::{FeatureError, FeatureMatrix};
use crate::labels::{FlowLabels, TrafficClass, TunnelKind};
use crate::learners::LearnError;
use crate::scalar::Scalar;

/// Default N for detection and tunnel classification.
pub const STAGE_N: usize = 50;
/// Default N for application classification.
pub const APP_STAGE_N: usize = 150;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage {stage} has {classes} class(es) in the data; at least 2 are needed")]
    DegenerateStage { stage: StageId, classes: usize },
    #[error("row {row} lacks the labels stage {stage} needs")]
    MissingLabel { row: usize, stage: StageId },
    #[error("no application model for tunnel kind {0}")]
    MissingModel(TunnelKind),
    #[error("unknown stage `{0}` (expected detection, tunnel or app:<kind>)")]
    UnknownStage(String),
    #[error("model predicted unknown label `{0}`")]
    UnknownPrediction(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StageId {
    Detection,
    TunnelClassification,
    AppClassification(TunnelKind),
}

impl StageId {
    /// Detection scores binary F1 of the tunneled class; the other stages
    /// score macro F1.
    pub fn metric(self) -> Metric {
        match self {
            StageId::Detection => Metric::binary(TrafficClass::Tunneled.as_str()),
            _ => Metric::F1Macro,
        }
    }

    /// Default N-first length of the stage.
    pub fn default_n(self) -> usize {
        match self {
            StageId::AppClassification(_) => APP_STAGE_N,
            _ => STAGE_N,
        }
    }

    /// Target label of a row, `None` when the row does not belong to the
    /// stage. Rows that belong but lack the target are an error.
    fn target(self, row: usize, l: &FlowLabels) -> Result<Option<String>, PipelineError> {
        let missing = || PipelineError::MissingLabel { row, stage: self };
        match self {
            StageId::Detection => Ok(Some(l.traffic_class.ok_or_else(missing)?.to_string())),
            StageId::TunnelClassification => match l.traffic_class {
                Some(TrafficClass::Tunneled) => Ok(Some(l.tunnel_kind.ok_or_else(missing)?.to_string())),
                Some(TrafficClass::Untunneled) => Ok(None),
                None => Err(missing()),
            },
            StageId::AppClassification(t) => {
                if l.traffic_class == Some(TrafficClass::Tunneled) && l.tunnel_kind == Some(t) {
                    Ok(Some(l.app_kind.ok_or_else(missing)?.to_string()))
                } else {
                    Ok(None)
                }
            }
        }
    }
}

impl fmt::Display for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StageId::Detection => f.write_str("detection"),
            StageId::TunnelClassification => f.write_str("tunnel"),
            StageId::AppClassification(t) => write!(f, "app:{t}"),
        }
    }
}

impl FromStr for StageId {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "detection" => Ok(StageId::Detection),
            "tunnel" => Ok(StageId::TunnelClassification),
            _ => s
                .strip_prefix("app:")
                .and_then(|k| k.parse().ok())
                .map(StageId::AppClassification)
                .ok_or_else(|| PipelineError::UnknownStage(s.to_string())),
        }
    }
}

impl Serialize for StageId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StageId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Row indices and targets of `stage` over `labels`.
pub fn stage_rows(labels: &[FlowLabels], stage: StageId) -> Result<(Vec<usize>, Vec<String>), PipelineError> {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        if let Some(t) = stage.target(i, l)? {
            rows.push(i);
            y.push(t);
        }
    }
    let mut classes: Vec<&String> = y.iter().collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(PipelineError::DegenerateStage {
            stage,
            classes: classes.len(),
        });
    }
    Ok((rows, y))
}

/// The rows and targets of a labeled matrix that take part in `stage`.
pub fn stage_dataset<T: Scalar>(
    ds: &FeatureMatrix<T>,
    stage: StageId,
) -> Result<(FeatureMatrix<T>, Vec<String>), PipelineError> {
    let (rows, y) = stage_rows(ds.row_labels(), stage)?;
    Ok((ds.select_rows(&rows), y))
}
