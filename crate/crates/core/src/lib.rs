//! Flow metadata features and supervised tunnel / application classification.
//!
//! The crate is organized bottom-up:
//!
//! * [`capture`] reads and writes classic pcap files.
//! * [`flow`] assembles packets into bidirectional five-tuple flows.
//! * [`features`] turns flows into named feature matrices.
//! * [`learners`] implements the classifiers and MDI importance.
//! * [`eval`] provides metrics, stratified folds, grid search, nested CV and
//!   learning curves.
//! * [`pipeline`] chains detection, tunnel classification and application
//!   classification, and drives feature sweeps.
//! * [`shift`] runs the cross-dataset and MTU generalization experiments.
//! * [`synth`] generates seeded labeled corpora.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod capture;
pub mod eval;
pub mod features;
pub mod flow;
pub mod labels;
pub mod learners;
pub mod pipeline;
pub mod scalar;
pub mod seed;
pub mod shift;
pub mod synth;

pub use scalar::Scalar;

pub type Matrix = features::FeatureMatrix<f64>;
pub type Summary = features::StatSummary<f64>;
pub type Model = learners::TrainedModel<f64>;
