use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{iou, BBox, FeatureRecord, KinematicParams, ObjectFeatures, TrackError, TrackState};

/// Which stage produced a box: the per-frame tracker prediction or the periodic detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Tracker,
    Detector,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Tracker => "tracker",
            Source::Detector => "detector",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame_index: u64,
    pub timestamp: f64,
    /// Ground-truth identity for evaluation; never used for association.
    pub track_hint: Option<u64>,
    pub bbox: BBox,
    pub source: Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerParams {
    /// Minimum IOU for a detector box to continue a live track.
    pub iou_threshold: f64,
    /// Minimum IOU for a tracker prediction to be applied to a live track.
    pub tracker_iou: f64,
    /// Nominal frames between detector cycles.
    pub detector_period: u64,
    /// Detector cycles without confirmation after which a track is dropped.
    pub stale_cycles: u64,
    pub kinematics: KinematicParams,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            tracker_iou: 0.3,
            detector_period: 5,
            stale_cycles: 3,
            kinematics: KinematicParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeleteReason {
    /// No detector box overlapped enough at a detector cycle.
    Unmatched,
    /// Missed too many detector cycles.
    Stale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackEvent {
    Spawned {
        track_id: u64,
        frame: u64,
    },
    Deleted {
        track_id: u64,
        frame: u64,
        reason: DeleteReason,
    },
}

/// Live track set of one camera stream.
#[derive(Debug, Clone)]
pub struct Tracker {
    params: TrackerParams,
    tracks: BTreeMap<u64, TrackState>,
    next_id: u64,
    last_frame: Option<(u64, f64)>,
}

impl Tracker {
    pub fn new(params: TrackerParams) -> Result<Self, TrackError> {
        if !(params.iou_threshold > 0.0 && params.iou_threshold < 1.0) {
            return Err(TrackError::InvalidParams(format!(
                "iou_threshold must lie in (0, 1), got {}",
                params.iou_threshold
            )));
        }
        if params.detector_period == 0 || params.kinematics.window < 2 {
            return Err(TrackError::InvalidParams(
                "detector_period must be positive and window at least 2".into(),
            ));
        }
        Ok(Self {
            params,
            tracks: BTreeMap::new(),
            next_id: 1,
            last_frame: None,
        })
    }

    /// Restores a track set; ids must be unique.
    pub fn with_tracks(params: TrackerParams, tracks: Vec<TrackState>) -> Result<Self, TrackError> {
        let mut tracker = Self::new(params)?;
        for t in tracks {
            let id = t.track_id;
            if tracker.tracks.insert(id, t).is_some() {
                return Err(TrackError::DuplicateTrack(id));
            }
            tracker.next_id = tracker.next_id.max(id + 1);
        }
        Ok(tracker)
    }

    pub fn params(&self) -> &TrackerParams {
        &self.params
    }

    pub fn tracks(&self) -> impl Iterator<Item = &TrackState> {
        self.tracks.values()
    }

    pub fn track(&self, id: u64) -> Option<&TrackState> {
        self.tracks.get(&id)
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    /// Applies every row of one frame: tracker predictions first, then any detector cycle.
    pub fn process_frame(
        &mut self,
        frame_index: u64,
        timestamp: f64,
        rows: &[Detection],
    ) -> Result<Vec<TrackEvent>, TrackError> {
        if let Some((f, t)) = self.last_frame {
            if frame_index <= f || timestamp < t {
                return Err(TrackError::OutOfOrderFrame {
                    frame: frame_index,
                    previous: f,
                });
            }
        }
        self.last_frame = Some((frame_index, timestamp));

        let (detector, tracker): (Vec<&Detection>, Vec<&Detection>) =
            rows.iter().partition(|d| d.source == Source::Detector);
        self.apply_tracker_rows(timestamp, &tracker)?;

        let mut events = Vec::new();
        if !detector.is_empty() {
            let owned: Vec<Detection> = detector.into_iter().cloned().collect();
            events.extend(self.reconcile_detections(frame_index, timestamp, &owned)?);
        }

        let horizon = self.params.stale_cycles * self.params.detector_period;
        let stale: Vec<u64> = self
            .tracks
            .values()
            .filter(|t| frame_index.saturating_sub(t.last_detector_frame) > horizon)
            .map(|t| t.track_id)
            .collect();
        for id in stale {
            self.tracks.remove(&id);
            events.push(TrackEvent::Deleted {
                track_id: id,
                frame: frame_index,
                reason: DeleteReason::Stale,
            });
        }
        Ok(events)
    }

    fn apply_tracker_rows(
        &mut self,
        timestamp: f64,
        rows: &[&Detection],
    ) -> Result<(), TrackError> {
        let boxes: Vec<BBox> = rows.iter().map(|d| d.bbox).collect();
        let pairs = greedy_match(&self.tracks, &boxes, self.params.tracker_iou);
        for (track_id, di) in pairs {
            let track = self
                .tracks
                .get_mut(&track_id)
                .expect("matched track exists");
            track.update(boxes[di], timestamp, &self.params.kinematics)?;
            track.hint = rows[di].track_hint.or(track.hint);
        }
        Ok(())
    }

    /// Detector-cycle reconciliation: greedy descending-IOU matching; matches at or
    /// above the threshold continue their track, unmatched detections spawn new
    /// tracks and unmatched tracks are deleted together with their features.
    pub fn reconcile_detections(
        &mut self,
        frame_index: u64,
        timestamp: f64,
        detections: &[Detection],
    ) -> Result<Vec<TrackEvent>, TrackError> {
        if let Some(d) = detections.iter().find(|d| d.source != Source::Detector) {
            return Err(TrackError::InvalidParams(format!(
                "reconciliation expects detector boxes, got a {} row at frame {}",
                d.source.as_str(),
                d.frame_index
            )));
        }
        let boxes: Vec<BBox> = detections.iter().map(|d| d.bbox).collect();
        let pairs = greedy_match(&self.tracks, &boxes, self.params.iou_threshold);

        let mut matched_det = vec![false; detections.len()];
        let mut matched_tracks = Vec::with_capacity(pairs.len());
        for &(track_id, di) in &pairs {
            matched_det[di] = true;
            matched_tracks.push(track_id);
            let track = self
                .tracks
                .get_mut(&track_id)
                .expect("matched track exists");
            if timestamp > track.last_seen {
                track.update(boxes[di], timestamp, &self.params.kinematics)?;
            } else {
                // already updated by a same-frame tracker row; take the detector box
                track.last_box = boxes[di];
            }
            track.last_detector_frame = frame_index;
            track.hint = detections[di].track_hint.or(track.hint);
        }

        let mut events = Vec::new();
        let orphans: Vec<u64> = self
            .tracks
            .keys()
            .copied()
            .filter(|id| !matched_tracks.contains(id))
            .collect();
        for id in orphans {
            self.tracks.remove(&id);
            events.push(TrackEvent::Deleted {
                track_id: id,
                frame: frame_index,
                reason: DeleteReason::Unmatched,
            });
        }
        for (di, det) in detections.iter().enumerate() {
            if matched_det[di] {
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            let mut track = TrackState::new(id, det.bbox, timestamp, frame_index);
            track.hint = det.track_hint;
            if self.tracks.insert(id, track).is_some() {
                return Err(TrackError::DuplicateTrack(id));
            }
            events.push(TrackEvent::Spawned {
                track_id: id,
                frame: frame_index,
            });
        }
        Ok(events)
    }

    /// Snapshot of every live track's indicators. Pure read.
    pub fn build_feature_record(&self, frame_index: u64, timestamp: f64) -> FeatureRecord {
        FeatureRecord {
            frame_index,
            timestamp,
            people_count: self.tracks.len() as u32,
            objects: self
                .tracks
                .values()
                .map(|t| ObjectFeatures {
                    track_id: t.track_id,
                    dwell_time: t.dwell_time(),
                    speed_changes: t.speed_change_count,
                    direction_changes: t.direction_change_count,
                })
                .collect(),
        }
    }
}

/// Greedy one-to-one matching in descending IOU order, ties broken by track id then box index.
/// Returns `(track_id, box index)` pairs with IOU at or above `threshold`.
pub fn greedy_match(
    tracks: &BTreeMap<u64, TrackState>,
    boxes: &[BBox],
    threshold: f64,
) -> Vec<(u64, usize)> {
    let mut candidates: Vec<(f64, u64, usize)> = Vec::new();
    for (id, track) in tracks {
        for (di, b) in boxes.iter().enumerate() {
            let v = iou(&track.last_box, b);
            if v >= threshold && v > 0.0 {
                candidates.push((v, *id, di));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_tracks = Vec::new();
    let mut used_boxes = vec![false; boxes.len()];
    let mut out = Vec::new();
    for (_, id, di) in candidates {
        if used_boxes[di] || used_tracks.contains(&id) {
            continue;
        }
        used_boxes[di] = true;
        used_tracks.push(id);
        out.push((id, di));
    }
    out
}
