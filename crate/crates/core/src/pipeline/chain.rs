use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{stage_rows, PipelineError, StageId, APP_STAGE_N, STAGE_N};
use crate::eval::ConfusionMatrix;
use crate::features::{build_matrix, FeatureSpec};
use crate::flow::{Flow, FlowKey};
use crate::labels::{AppKind, TrafficClass, TunnelKind};
use crate::learners::{fit, Hyperparams, TrainedModel};
use crate::scalar::Scalar;
use crate::seed::derive_path;

/// How the stage models are trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Feature families; N-first lengths are replaced per stage.
    pub spec: FeatureSpec,
    pub stage_n: usize,
    pub app_n: usize,
    pub params: Hyperparams,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(spec: FeatureSpec, params: Hyperparams, seed: u64) -> Self {
        PipelineConfig {
            spec,
            stage_n: STAGE_N,
            app_n: APP_STAGE_N,
            params,
            seed,
        }
    }

    fn spec_for(&self, stage: StageId) -> FeatureSpec {
        match stage {
            StageId::AppClassification(_) => self.spec.with_n(self.app_n),
            _ => self.spec.with_n(self.stage_n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StageModel<T> {
    pub stage: StageId,
    pub spec: FeatureSpec,
    pub model: TrainedModel<T>,
}

impl<T: Scalar> StageModel<T> {
    fn scores(&self, flows: &[&Flow]) -> Result<(Vec<String>, Vec<Vec<f64>>), PipelineError> {
        let x = build_matrix::<T, _>(flows, &self.spec)?;
        let scores = self.model.predict_scores(&x)?;
        let idx = self.model.predict_indices(&x)?;
        Ok((idx.into_iter().map(|i| self.model.classes[i].clone()).collect(), scores))
    }
}

/// Detection, tunnel-classification and per-kind application models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PipelineModels<T> {
    pub detection: StageModel<T>,
    pub tunnel: StageModel<T>,
    /// One model per tunnel kind, in kind order.
    pub apps: Vec<StageModel<T>>,
}

impl<T: Scalar> PipelineModels<T> {
    pub fn app_model(&self, kind: TunnelKind) -> Option<&StageModel<T>> {
        self.apps.iter().find(|m| m.stage == StageId::AppClassification(kind))
    }

    pub fn stages(&self) -> impl Iterator<Item = &StageModel<T>> {
        [&self.detection, &self.tunnel].into_iter().chain(&self.apps)
    }
}

fn train_stage<T: Scalar>(
    flows: &[Flow],
    stage: StageId,
    cfg: &PipelineConfig,
    stream: u64,
) -> Result<StageModel<T>, PipelineError> {
    let labels: Vec<_> = flows.iter().map(|f| f.labels.clone()).collect();
    let (rows, y) = stage_rows(&labels, stage)?;
    let subset: Vec<&Flow> = rows.iter().map(|&i| &flows[i]).collect();
    let spec = cfg.spec_for(stage);
    let x = build_matrix::<T, _>(&subset, &spec)?;
    let model = fit(&cfg.params, &x, &y, derive_path(cfg.seed, &[stream]))?;
    Ok(StageModel { stage, spec, model })
}

/// Trains every stage on labeled flows. Application models are built for
/// each tunnel kind whose flows carry at least two applications.
pub fn train_pipeline<T: Scalar>(flows: &[Flow], cfg: &PipelineConfig) -> Result<PipelineModels<T>, PipelineError> {
    let detection = train_stage(flows, StageId::Detection, cfg, 0)?;
    let tunnel = train_stage(flows, StageId::TunnelClassification, cfg, 1)?;
    let mut apps = Vec::new();
    for (i, &kind) in TunnelKind::ALL.iter().enumerate() {
        match train_stage(flows, StageId::AppClassification(kind), cfg, 2 + i as u64) {
            Ok(m) => apps.push(m),
            Err(PipelineError::DegenerateStage { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(PipelineModels {
        detection,
        tunnel,
        apps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedLabels {
    pub is_tunnel: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tunnel_kind: Option<TunnelKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub app_kind: Option<AppKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedScores {
    pub detection: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tunnel: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub app: Option<Vec<f64>>,
}

/// Pipeline output of one flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub key: FlowKey,
    pub start_ts_micros: u64,
    pub predictions: PredictedLabels,
    pub scores: PredictedScores,
}

fn parse<L: std::str::FromStr>(s: &str) -> Result<L, PipelineError> {
    s.parse().map_err(|_| PipelineError::UnknownPrediction(s.to_string()))
}

/// Runs the chain: flows judged untunneled stop after detection, tunnels
/// are classified by kind and routed to that kind's application model.
pub fn run_pipeline<T: Scalar>(flows: &[Flow], models: &PipelineModels<T>) -> Result<Vec<Prediction>, PipelineError> {
    let all: Vec<&Flow> = flows.iter().collect();
    let (det, det_scores) = models.detection.scores(&all)?;
    let mut out: Vec<Prediction> = flows
        .iter()
        .zip(det_scores)
        .map(|(f, s)| Prediction {
            key: f.key,
            start_ts_micros: f.start_ts(),
            predictions: PredictedLabels {
                is_tunnel: false,
                tunnel_kind: None,
                app_kind: None,
            },
            scores: PredictedScores {
                detection: s,
                tunnel: None,
                app: None,
            },
        })
        .collect();
    let mut tunneled = Vec::new();
    for (i, label) in det.iter().enumerate() {
        if parse::<TrafficClass>(label)? == TrafficClass::Tunneled {
            out[i].predictions.is_tunnel = true;
            tunneled.push(i);
        }
    }
    if tunneled.is_empty() {
        return Ok(out);
    }
    let subset: Vec<&Flow> = tunneled.iter().map(|&i| &flows[i]).collect();
    let (kinds, kind_scores) = models.tunnel.scores(&subset)?;
    let mut by_kind: Vec<(TunnelKind, Vec<usize>)> = Vec::new();
    for ((&i, k), s) in tunneled.iter().zip(&kinds).zip(kind_scores) {
        let kind: TunnelKind = parse(k)?;
        out[i].predictions.tunnel_kind = Some(kind);
        out[i].scores.tunnel = Some(s);
        match by_kind.iter_mut().find(|(k, _)| *k == kind) {
            Some((_, rows)) => rows.push(i),
            None => by_kind.push((kind, vec![i])),
        }
    }
    by_kind.sort_by_key(|(k, _)| *k);
    for (kind, rows) in by_kind {
        let model = models.app_model(kind).ok_or(PipelineError::MissingModel(kind))?;
        let subset: Vec<&Flow> = rows.iter().map(|&i| &flows[i]).collect();
        let (apps, app_scores) = model.scores(&subset)?;
        for ((&i, a), s) in rows.iter().zip(&apps).zip(app_scores) {
            out[i].predictions.app_kind = Some(parse(a)?);
            out[i].scores.app = Some(s);
        }
    }
    Ok(out)
}

/// Writes one JSON object per prediction.
pub fn write_predictions<W: Write>(preds: &[Prediction], mut out: W) -> Result<(), PipelineError> {
    for p in preds {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Score of one stage model evaluated on its own stage rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageScore {
    pub stage: StageId,
    pub metric: String,
    pub score: f64,
    pub rows: usize,
    pub confusion: ConfusionMatrix,
}

/// Scores every stage model on the labeled `flows` with true routing, so
/// each stage is judged on its own (not on upstream mistakes). Stages
/// without rows in `flows` are skipped.
pub fn stage_scores<T: Scalar>(flows: &[Flow], models: &PipelineModels<T>) -> Result<Vec<StageScore>, PipelineError> {
    let labels: Vec<_> = flows.iter().map(|f| f.labels.clone()).collect();
    let mut out = Vec::new();
    for m in models.stages() {
        let (rows, y) = match stage_rows(&labels, m.stage) {
            Ok(r) => r,
            Err(PipelineError::DegenerateStage { .. }) => continue,
            Err(e) => return Err(e),
        };
        let subset: Vec<&Flow> = rows.iter().map(|&i| &flows[i]).collect();
        let (pred, _) = m.scores(&subset)?;
        let cm = ConfusionMatrix::from_labels(&y, &pred);
        let metric = m.stage.metric();
        out.push(StageScore {
            stage: m.stage,
            metric: metric.name().to_string(),
            score: metric.score(&cm),
            rows: rows.len(),
            confusion: cm,
        });
    }
    Ok(out)
}
