use serde::{Deserialize, Serialize};

/// Movement indicators of one tracked object at one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectFeatures {
    pub track_id: u64,
    /// Seconds since the track was first seen.
    pub dwell_time: f64,
    pub speed_changes: u32,
    pub direction_changes: u32,
}

/// Per-frame feature bundle the edge ships to the fog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub frame_index: u64,
    /// Seconds since the Unix epoch (UTC).
    pub timestamp: f64,
    pub people_count: u32,
    pub objects: Vec<ObjectFeatures>,
}

impl FeatureRecord {
    pub fn empty(frame_index: u64, timestamp: f64) -> Self {
        Self {
            frame_index,
            timestamp,
            people_count: 0,
            objects: Vec::new(),
        }
    }
}
