use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{BBox, TrackError};

/// Thresholds for counting speed and direction changes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicParams {
    /// Relative speed change that counts as a change (0.5 = 50%).
    pub speed_delta: f64,
    /// Heading change, in radians, that counts as a direction change.
    pub heading_delta: f64,
    /// Samples in the smoothing window.
    pub window: usize,
    /// Minimum seconds between two change evaluations.
    pub refractory: f64,
    /// Speeds below this (px/s) are treated as standing still.
    pub speed_floor: f64,
}

impl Default for KinematicParams {
    fn default() -> Self {
        Self {
            speed_delta: 0.5,
            heading_delta: 45f64.to_radians(),
            window: 5,
            refractory: 1.0,
            speed_floor: 2.0,
        }
    }
}

/// Retained centroid samples per track.
pub const HISTORY_CAPACITY: usize = 64;

const TIME_EPS: f64 = 1e-9;

/// Kinematic history and change counters of one tracked object.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub track_id: u64,
    /// `(timestamp, centroid)` in arrival order.
    pub history: VecDeque<(f64, (f64, f64))>,
    pub last_box: BBox,
    /// Pixels per second over the smoothing window.
    pub smoothed_speed: f64,
    /// Radians, `atan2` convention; last heading seen while moving.
    pub smoothed_heading: f64,
    pub speed_change_count: u32,
    pub direction_change_count: u32,
    pub first_seen: f64,
    pub last_seen: f64,
    /// Frame of the last detector confirmation.
    pub last_detector_frame: u64,
    /// Ground-truth id carried by the input rows; bookkeeping only.
    pub hint: Option<u64>,
    reference_speed: Option<f64>,
    reference_heading: Option<f64>,
    last_evaluation: Option<f64>,
}

impl TrackState {
    pub fn new(track_id: u64, bbox: BBox, timestamp: f64, frame: u64) -> Self {
        let mut history = VecDeque::with_capacity(HISTORY_CAPACITY);
        history.push_back((timestamp, bbox.centroid()));
        Self {
            track_id,
            history,
            last_box: bbox,
            smoothed_speed: 0.0,
            smoothed_heading: 0.0,
            speed_change_count: 0,
            direction_change_count: 0,
            first_seen: timestamp,
            last_seen: timestamp,
            last_detector_frame: frame,
            hint: None,
            reference_speed: None,
            reference_heading: None,
            last_evaluation: None,
        }
    }

    /// Seconds since the track was first seen.
    pub fn dwell_time(&self) -> f64 {
        (self.last_seen - self.first_seen).max(0.0)
    }

    /// Appends a new observation and updates speed, heading and change counters.
    ///
    /// Speed and heading come from the net centroid displacement across the last
    /// `window` samples. Changes are checked against the values recorded at the
    /// previous check, at most once per `refractory` seconds.
    pub fn update(
        &mut self,
        bbox: BBox,
        timestamp: f64,
        params: &KinematicParams,
    ) -> Result<(), TrackError> {
        if timestamp.partial_cmp(&self.last_seen) != Some(std::cmp::Ordering::Greater) {
            return Err(TrackError::NonMonotoneTimestamp {
                track_id: self.track_id,
                previous: self.last_seen,
                got: timestamp,
            });
        }
        if self.history.len() == HISTORY_CAPACITY {
            self.history.pop_front();
        }
        self.history.push_back((timestamp, bbox.centroid()));
        self.last_box = bbox;
        self.last_seen = timestamp;

        let k = params.window.max(2);
        if self.history.len() < k {
            return Ok(());
        }
        let (t0, (x0, y0)) = self.history[self.history.len() - k];
        let (t1, (x1, y1)) = self.history[self.history.len() - 1];
        let dt = t1 - t0;
        if dt <= 0.0 {
            return Ok(());
        }
        let (vx, vy) = ((x1 - x0) / dt, (y1 - y0) / dt);
        let speed = vx.hypot(vy);
        let moving = speed >= params.speed_floor;
        self.smoothed_speed = speed;
        if moving {
            self.smoothed_heading = vy.atan2(vx);
        }
        let effective = if moving { speed } else { 0.0 };

        match self.last_evaluation {
            None => {
                self.reference_speed = Some(effective);
                self.reference_heading = moving.then_some(self.smoothed_heading);
                self.last_evaluation = Some(timestamp);
            }
            Some(last) if timestamp - last >= params.refractory - TIME_EPS => {
                let reference = self.reference_speed.unwrap_or(0.0);
                if (effective - reference).abs() / reference.max(params.speed_floor)
                    > params.speed_delta
                {
                    self.speed_change_count += 1;
                }
                if moving {
                    if let Some(h) = self.reference_heading {
                        if angle_between(h, self.smoothed_heading) > params.heading_delta {
                            self.direction_change_count += 1;
                        }
                    }
                    self.reference_heading = Some(self.smoothed_heading);
                }
                self.reference_speed = Some(effective);
                self.last_evaluation = Some(timestamp);
            }
            Some(_) => {}
        }
        Ok(())
    }
}

/// Absolute angular difference folded into `[0, π]`.
pub fn angle_between(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}
