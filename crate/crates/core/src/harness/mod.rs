//! Offline replay, synthetic scenarios, TP/FP evaluation and reports.

mod dataset;
mod evaluate;
mod replay;
mod report;
mod runtime;
mod scenario;

pub use dataset::{
    load_labels, load_track_dataset, parse_labels, parse_track_dataset, write_labels,
    write_track_dataset,
};
pub use evaluate::{evaluate, EvaluationResult, DEFAULT_MATCH_WINDOW};
pub use replay::{
    read_timeline, read_track_hints, replay, timeline_csv, track_hints_csv, ReplayOptions,
    ReplayOutput, TimelineRow,
};
pub use report::{emit_report, report_csv, runtime_text, summary_text, ScenarioResult};
pub use runtime::{RuntimeSnapshot, RuntimeStats};
pub use scenario::{
    apply_dropout, default_suite, generate_scenario, Label, LabelKind, Scenario, ScenarioKind,
    ScenarioParams, SUITE_EPOCH,
};

use std::fmt;
use std::io;
use std::path::Path;

use thiserror::Error;

/// Pipeline stage an error is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Dataset,
    TrackFeatures,
    Transport,
    ContextFog,
    Evaluate,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Dataset => "dataset",
            Stage::TrackFeatures => "track-features",
            Stage::Transport => "transport",
            Stage::ContextFog => "context-fog",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        })
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{origin}:{line}: {reason}")]
    Dataset {
        origin: String,
        line: u64,
        reason: String,
    },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("{stage} stage failed: {message}")]
    Stage { stage: Stage, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl HarnessError {
    pub(crate) fn stage(stage: Stage, err: impl fmt::Display) -> Self {
        Self::Stage {
            stage,
            message: err.to_string(),
        }
    }

    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Stage the error belongs to, for exit messages.
    pub fn stage_name(&self) -> String {
        match self {
            Self::Dataset { .. } => Stage::Dataset.to_string(),
            Self::Scenario(_) => "generate".into(),
            Self::Stage { stage, .. } => stage.to_string(),
            Self::Io { .. } => "io".into(),
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}
