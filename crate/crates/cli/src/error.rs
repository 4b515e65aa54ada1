use std::path::{Path, PathBuf};

use thiserror::Error;
use tunnelflow::capture::CaptureError;
use tunnelflow::eval::EvalError;
use tunnelflow::features::FeatureError;
use tunnelflow::learners::LearnError;
use tunnelflow::pipeline::PipelineError;
use tunnelflow::shift::ShiftError;
use tunnelflow::synth::SynthError;

/// Exit status of a failed run.
pub const EXIT_EXPERIMENT: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, unreadable or malformed inputs.
    #[error("{0}")]
    Input(String),
    /// The inputs are well formed but the experiment cannot run on them.
    #[error("{0}")]
    Experiment(String),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Experiment(_) | CliError::Write { .. } => EXIT_EXPERIMENT,
        }
    }

    /// Prefixes the message with the file it concerns.
    pub fn in_file(self, path: &Path) -> Self {
        match self {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
            other => other,
        }
    }

    pub fn write(path: &Path, source: std::io::Error) -> Self {
        CliError::Write {
            path: path.to_path_buf(),
            source,
        }
    }
}

const DEGENERATE_HINT: &str = "provide flows of at least two classes for this stage";
const STRATA_HINT: &str = "provide more flows per class or lower the number of folds";

impl From<CaptureError> for CliError {
    fn from(e: CaptureError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<LearnError> for CliError {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::DegenerateTraining(_) => CliError::Experiment(format!("{e}; {DEGENERATE_HINT}")),
            LearnError::InvalidParams(_)
            | LearnError::UnsupportedModel(_)
            | LearnError::Format(_)
            | LearnError::Json(_) => CliError::Input(e.to_string()),
            LearnError::InvalidInput(_) => CliError::Experiment(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Learn(l) => l.into(),
            EvalError::Stratification { .. } => CliError::Experiment(format!("{e}; {STRATA_HINT}")),
            EvalError::InvalidSize { .. } => CliError::Experiment(format!("{e}; request a smaller size")),
            EvalError::InvalidInput(_) => CliError::Input(e.to_string()),
            EvalError::Io(_) | EvalError::Csv(_) => CliError::Experiment(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Feature(f) => f.into(),
            PipelineError::Learn(l) => l.into(),
            PipelineError::Eval(v) => v.into(),
            PipelineError::DegenerateStage { .. } => CliError::Experiment(format!("{e}; {DEGENERATE_HINT}")),
            PipelineError::MissingLabel { .. } => {
                CliError::Input(format!("{e}; training flows need ground-truth labels"))
            }
            PipelineError::UnknownStage(_) => CliError::Input(e.to_string()),
            PipelineError::MissingModel(_) | PipelineError::UnknownPrediction(_) => CliError::Experiment(e.to_string()),
            PipelineError::Io(_) | PipelineError::Json(_) => CliError::Experiment(e.to_string()),
        }
    }
}

impl From<ShiftError> for CliError {
    fn from(e: ShiftError) -> Self {
        match e {
            ShiftError::Pipeline(p) => p.into(),
            ShiftError::Eval(v) => v.into(),
            ShiftError::Feature(f) => f.into(),
            ShiftError::Learn(l) => l.into(),
            ShiftError::DegenerateDomain { .. } => CliError::Experiment(format!("{e}; {DEGENERATE_HINT}")),
            ShiftError::MissingStratum(_) => {
                CliError::Experiment(format!("{e}; generate or select flows for every requested mtu"))
            }
            ShiftError::NoSpecs => CliError::Input(e.to_string()),
            ShiftError::Io(_) | ShiftError::Json(_) => CliError::Experiment(e.to_string()),
        }
    }
}
