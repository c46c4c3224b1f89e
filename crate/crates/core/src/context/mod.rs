//! Fog-side contextualization (hour of day, camera placement, building
//! security level) and the alarm policy applied to defuzzified scores.

mod decision;
mod policy;

pub use decision::{
    decide, decision_log_header, format_decision_line, DecisionLog, DecisionMaker, FileDecisionLog,
    MemoryDecisionLog, SuspicionReport,
};
pub use policy::{
    alarm_threshold, is_after_hours, CameraContext, ContextConfig, Placement, ThresholdPolicy,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy::{FuzzyError, ScoreInputs};
use crate::track::FeatureRecord;

#[derive(Debug, Error)]
pub enum ContextError {
    #[error("unknown camera `{0}`")]
    UnknownCamera(String),
    #[error("invalid camera context `{camera}`: {reason}")]
    InvalidCamera { camera: String, reason: String },
    #[error("record {frame} from `{camera}` has an invalid timestamp {timestamp}")]
    InvalidTimestamp {
        camera: String,
        frame: u64,
        timestamp: f64,
    },
    #[error("cannot load context configuration: {0}")]
    Load(String),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
}

/// One object's features together with the fog-side context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextualizedFeatures {
    pub camera_id: String,
    pub frame_index: u64,
    pub timestamp: f64,
    pub track_id: u64,
    pub dwell_time: f64,
    pub speed_changes: u32,
    pub direction_changes: u32,
    /// Frame-level count, identical for every object of the record.
    pub people_count: u32,
    /// Local hour, `[0, 24)`.
    pub hour_of_day: f64,
}

impl ContextualizedFeatures {
    pub fn score_inputs(&self) -> ScoreInputs {
        ScoreInputs {
            hour: self.hour_of_day,
            speed_changes: self.speed_changes as f64,
            dwell_time: self.dwell_time,
            people_count: self.people_count as f64,
            direction_changes: self.direction_changes as f64,
        }
    }

    pub fn object_id(&self) -> String {
        format!("{}/{}", self.camera_id, self.track_id)
    }
}

/// Local hour of day for a UTC epoch timestamp.
pub fn hour_of_day(timestamp: f64, tz_offset_hours: f64) -> f64 {
    let local = timestamp + tz_offset_hours * 3600.0;
    let h = local.rem_euclid(86_400.0) / 3600.0;
    // rem_euclid can round up to exactly 24 for tiny negative inputs
    if h >= 24.0 {
        0.0
    } else {
        h
    }
}

/// Expands a feature record into one entry per object, attaching the camera context.
pub fn contextualize(
    record: &FeatureRecord,
    ctx: &CameraContext,
) -> Result<Vec<ContextualizedFeatures>, ContextError> {
    if !record.timestamp.is_finite() {
        return Err(ContextError::InvalidTimestamp {
            camera: ctx.camera_id.clone(),
            frame: record.frame_index,
            timestamp: record.timestamp,
        });
    }
    let hour = hour_of_day(record.timestamp, ctx.tz_offset_hours);
    Ok(record
        .objects
        .iter()
        .map(|o| ContextualizedFeatures {
            camera_id: ctx.camera_id.clone(),
            frame_index: record.frame_index,
            timestamp: record.timestamp,
            track_id: o.track_id,
            dwell_time: o.dwell_time,
            speed_changes: o.speed_changes,
            direction_changes: o.direction_changes,
            people_count: record.people_count,
            hour_of_day: hour,
        })
        .collect())
}
