//! Edge-side track maintenance and movement-indicator extraction.

mod geometry;
mod kinematics;
mod record;
mod tracker;

pub use geometry::{iou, BBox};
pub use kinematics::{angle_between, KinematicParams, TrackState, HISTORY_CAPACITY};
pub use record::{FeatureRecord, ObjectFeatures};
pub use tracker::{
    greedy_match, DeleteReason, Detection, Source, TrackEvent, Tracker, TrackerParams,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TrackError {
    #[error("track {track_id}: timestamp {got} does not advance past {previous}")]
    NonMonotoneTimestamp {
        track_id: u64,
        previous: f64,
        got: f64,
    },
    #[error("frame {frame} arrived after frame {previous}")]
    OutOfOrderFrame { frame: u64, previous: u64 },
    #[error("duplicate track id {0}")]
    DuplicateTrack(u64),
    #[error("invalid tracker parameters: {0}")]
    InvalidParams(String),
}
