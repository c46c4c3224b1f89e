use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{load_labels, load_track_dataset, write_labels, write_track_dataset};
use super::{read_file, write_file, HarnessError};
use crate::context::{CameraContext, Placement};
use crate::track::{BBox, Detection, Source};

/// 2024-01-01T00:00:00Z; generated streams start this day.
pub const SUITE_EPOCH: f64 = 1_704_067_200.0;

const FRAME_W: f64 = 640.0;
const FRAME_H: f64 = 480.0;
const MARGIN: f64 = 40.0;
const PERSON_W: f64 = 40.0;
const PERSON_H: f64 = 80.0;
/// Per-frame box noise radius in px; well under the standing-speed floor.
const JITTER: f64 = 0.3;
const DETECTOR_PERIOD: u64 = 5;
const STOP_SECONDS: f64 = 3.0;
const DROPOUT_CHUNK: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    StraightWalk,
    Loiter,
    NightWalk,
    Crowd,
    OcclusionDropout,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::StraightWalk,
        ScenarioKind::Loiter,
        ScenarioKind::NightWalk,
        ScenarioKind::Crowd,
        ScenarioKind::OcclusionDropout,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::StraightWalk => "straight-walk",
            ScenarioKind::Loiter => "loiter",
            ScenarioKind::NightWalk => "night-walk",
            ScenarioKind::Crowd => "crowd",
            ScenarioKind::OcclusionDropout => "occlusion-dropout",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| HarnessError::Scenario(format!("unknown scenario kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Normal,
    Loitering,
}

/// Ground truth for one person: visible over `[start, end]` (epoch seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub track_hint: u64,
    pub start: f64,
    pub end: f64,
    pub kind: LabelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    /// Local hour at the first frame.
    pub start_hour: f64,
    /// Seconds; for walks, the time to cross the frame.
    pub duration: f64,
    pub fps: f64,
    pub people: usize,
    /// Walking speed in px/s; derived from the duration when absent.
    #[serde(default)]
    pub speed: Option<f64>,
    /// Loiter: number of back-and-forth reversals.
    #[serde(default)]
    pub reversals: usize,
    /// Loiter: number of standing pauses.
    #[serde(default)]
    pub stops: usize,
    /// Walks: number of zig-zag heading changes.
    #[serde(default)]
    pub turns: usize,
    /// Occlusion: fraction of each person's visible time with no boxes.
    #[serde(default)]
    pub dropout: f64,
    pub camera: CameraContext,
}

impl ScenarioParams {
    pub fn defaults(kind: ScenarioKind) -> Self {
        let base = Self {
            start_hour: 11.0,
            duration: 100.0,
            fps: 5.0,
            people: 1,
            speed: None,
            reversals: 0,
            stops: 0,
            turns: 0,
            dropout: 0.0,
            camera: CameraContext {
                camera_id: "cam-1".into(),
                placement: Placement::Indoor,
                security_level: 1,
                tz_offset_hours: 0.0,
            },
        };
        match kind {
            ScenarioKind::StraightWalk => base,
            ScenarioKind::Loiter => Self {
                start_hour: 3.0,
                duration: 120.0,
                reversals: 4,
                stops: 2,
                ..base
            },
            ScenarioKind::NightWalk => Self {
                start_hour: 3.0,
                duration: 6.0,
                ..base
            },
            ScenarioKind::Crowd => Self {
                start_hour: 13.0,
                duration: 60.0,
                people: 8,
                ..base
            },
            ScenarioKind::OcclusionDropout => Self {
                start_hour: 10.0,
                duration: 80.0,
                people: 2,
                dropout: 0.25,
                ..base
            },
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Scenario(m));
        if !(self.start_hour.is_finite() && (0.0..24.0).contains(&self.start_hour)) {
            return bad(format!("start_hour {} outside [0, 24)", self.start_hour));
        }
        if !(self.duration.is_finite() && self.duration > 0.0 && self.duration <= 86_400.0) {
            return bad(format!("duration {} must be in (0, 86400]", self.duration));
        }
        if !(self.fps.is_finite() && self.fps > 0.0 && self.fps <= 60.0) {
            return bad(format!("fps {} must be in (0, 60]", self.fps));
        }
        if !(1..=64).contains(&self.people) {
            return bad(format!("people {} must be in 1..=64", self.people));
        }
        if let Some(v) = self.speed {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("speed {v} must be positive"));
            }
        }
        if !(self.dropout.is_finite() && (0.0..=0.9).contains(&self.dropout)) {
            return bad(format!("dropout {} must be in [0, 0.9]", self.dropout));
        }
        if self.stops > self.reversals + 1 {
            return bad(format!(
                "{} stops need at least {} reversals",
                self.stops,
                self.stops - 1
            ));
        }
        self.camera
            .validate()
            .map_err(|e| HarnessError::Scenario(e.to_string()))
    }

    /// UTC epoch of frame 0.
    pub fn start_timestamp(&self) -> f64 {
        SUITE_EPOCH + (self.start_hour - self.camera.tz_offset_hours) * 3600.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub seed: u64,
    pub params: ScenarioParams,
    pub detections: Vec<Detection>,
    pub labels: Vec<Label>,
    pub notes: String,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    name: String,
    kind: ScenarioKind,
    seed: u64,
    params: ScenarioParams,
    notes: String,
    detections: String,
    labels: String,
}

impl Scenario {
    pub fn camera(&self) -> &CameraContext {
        &self.params.camera
    }

    pub fn count(&self, kind: LabelKind) -> usize {
        self.labels.iter().filter(|l| l.kind == kind).count()
    }

    /// Writes `scenario.json`, `detections.csv` and `labels.csv` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), HarnessError> {
        let dir = dir.as_ref();
        let manifest = Manifest {
            name: self.name.clone(),
            kind: self.kind,
            seed: self.seed,
            params: self.params.clone(),
            notes: self.notes.clone(),
            detections: "detections.csv".into(),
            labels: "labels.csv".into(),
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        write_file(&dir.join("scenario.json"), json)?;
        write_file(
            &dir.join("detections.csv"),
            write_track_dataset(&self.detections),
        )?;
        write_file(&dir.join("labels.csv"), write_labels(&self.labels))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let dir = dir.as_ref();
        let path = dir.join("scenario.json");
        let m: Manifest = serde_json::from_str(&read_file(&path)?)
            .map_err(|e| HarnessError::Scenario(format!("{}: {e}", path.display())))?;
        let scenario = Self {
            name: m.name,
            kind: m.kind,
            seed: m.seed,
            detections: load_track_dataset(dir.join(&m.detections))?,
            labels: load_labels(dir.join(&m.labels))?,
            params: m.params,
            notes: m.notes,
        };
        scenario
            .params
            .camera
            .validate()
            .map_err(|e| HarnessError::Scenario(e.to_string()))?;
        Ok(scenario)
    }
}

/// One synthetic person: enters at `enter` seconds and follows `legs` of `(seconds, vx, vy)`.
struct Walker {
    hint: u64,
    enter: f64,
    start: (f64, f64),
    legs: Vec<(f64, f64, f64)>,
    kind: LabelKind,
}

impl Walker {
    fn exit(&self) -> f64 {
        self.enter + self.legs.iter().map(|l| l.0).sum::<f64>()
    }

    fn position(&self, t: f64) -> Option<(f64, f64)> {
        const EPS: f64 = 1e-9;
        if t < self.enter - EPS || t > self.exit() + EPS {
            return None;
        }
        let (mut x, mut y) = self.start;
        let mut left = t - self.enter;
        for &(dur, vx, vy) in &self.legs {
            let dt = left.min(dur).max(0.0);
            x += vx * dt;
            y += vy * dt;
            left -= dur;
            if left <= 0.0 {
                break;
            }
        }
        Some((x, y))
    }
}

/// Left-to-right (or reversed) crossing at lane `y`, optionally zig-zagging.
fn crossing(hint: u64, enter: f64, y: f64, rightwards: bool, speed: f64, turns: usize) -> Walker {
    let span = FRAME_W - 2.0 * MARGIN;
    let total = span / speed;
    let sign = if rightwards { 1.0 } else { -1.0 };
    let x0 = if rightwards { MARGIN } else { FRAME_W - MARGIN };
    let legs = if turns == 0 {
        vec![(total, sign * speed, 0.0)]
    } else {
        let n = turns + 1;
        let dur = total / n as f64;
        // 50 degrees off the walking axis, bounded so the zig-zag stays in frame
        let vy = (speed * 50f64.to_radians().tan()).min(150.0 / dur);
        (0..n)
            .map(|i| (dur, sign * speed, if i % 2 == 0 { -vy } else { vy }))
            .collect()
    };
    Walker {
        hint,
        enter,
        start: (x0, y),
        legs,
        kind: LabelKind::Normal,
    }
}

fn lane(k: usize, n: usize, spacing: f64) -> f64 {
    let offset = (k as f64 - (n as f64 - 1.0) / 2.0) * spacing;
    (FRAME_H / 2.0 + offset).clamp(MARGIN + PERSON_H / 2.0, FRAME_H - MARGIN - PERSON_H / 2.0)
}

fn walkers(kind: ScenarioKind, p: &ScenarioParams, rng: &mut ChaCha8Rng) -> Vec<Walker> {
    let span = FRAME_W - 2.0 * MARGIN;
    match kind {
        ScenarioKind::StraightWalk | ScenarioKind::NightWalk | ScenarioKind::OcclusionDropout => {
            let speed = p.speed.unwrap_or(span / p.duration);
            let spacing = if kind == ScenarioKind::OcclusionDropout {
                60.0
            } else {
                110.0
            };
            (0..p.people)
                .map(|k| {
                    crossing(
                        k as u64 + 1,
                        k as f64,
                        lane(k, p.people, spacing),
                        k % 2 == 0,
                        speed,
                        p.turns,
                    )
                })
                .collect()
        }
        ScenarioKind::Loiter => {
            let moving = p.reversals + 1;
            let leg = ((p.duration - p.stops as f64 * STOP_SECONDS) / moving as f64).max(1.0);
            let speed = p.speed.unwrap_or(25.0).min((span - 80.0) / leg);
            // pauses sit at evenly spaced reversal points
            let mut pause_after: Vec<usize> = (0..p.stops)
                .map(|s| ((s + 1) * moving / (p.stops + 1)).saturating_sub(1))
                .collect();
            pause_after.dedup();
            let extra = p.stops - pause_after.len();
            let mut legs = Vec::new();
            for i in 0..moving {
                let dir = if i % 2 == 0 { 1.0 } else { -1.0 };
                legs.push((leg, dir * speed, dir * 0.2 * speed));
                if pause_after.contains(&i) {
                    legs.push((STOP_SECONDS, 0.0, 0.0));
                }
            }
            legs.extend(std::iter::repeat_n((STOP_SECONDS, 0.0, 0.0), extra));
            let x0 = FRAME_W / 2.0 - speed * leg / 2.0;
            let mut out = vec![Walker {
                hint: 1,
                enter: 0.0,
                start: (x0, FRAME_H / 2.0),
                legs,
                kind: LabelKind::Loitering,
            }];
            for k in 1..p.people {
                let w = crossing(
                    k as u64 + 1,
                    2.0 * k as f64,
                    lane(k - 1, p.people - 1, 110.0) - 150.0,
                    k % 2 == 0,
                    40.0,
                    0,
                );
                out.push(w);
            }
            out
        }
        ScenarioKind::Crowd => (0..p.people)
            .map(|k| {
                let speed = p.speed.unwrap_or_else(|| rng.gen_range(30.0..60.0));
                let latest = (p.duration - span / speed).max(0.0);
                let enter = if latest > 0.0 {
                    rng.gen_range(0.0..latest)
                } else {
                    0.0
                };
                let y = rng.gen_range(MARGIN + PERSON_H / 2.0..FRAME_H - MARGIN - PERSON_H / 2.0);
                crossing(k as u64 + 1, enter, y, rng.gen_bool(0.5), speed, 0)
            })
            .collect(),
    }
}

fn render(
    walkers: &[Walker],
    p: &ScenarioParams,
    rng: &mut ChaCha8Rng,
) -> (Vec<Detection>, Vec<Label>) {
    let t0 = p.start_timestamp();
    let end = walkers.iter().map(Walker::exit).fold(0.0, f64::max);
    let frames = (end * p.fps + 1e-9).floor() as u64;
    let mut detections = Vec::new();
    let mut seen: Vec<Option<(f64, f64)>> = vec![None; walkers.len()];
    for frame in 0..=frames {
        let t = frame as f64 / p.fps;
        let timestamp = t0 + t;
        for (i, w) in walkers.iter().enumerate() {
            let Some((x, y)) = w.position(t) else {
                continue;
            };
            let angle = rng.gen::<f64>() * std::f64::consts::TAU;
            let r = JITTER * rng.gen::<f64>().sqrt();
            let bbox = BBox::centered(x + r * angle.cos(), y + r * angle.sin(), PERSON_W, PERSON_H);
            let row = Detection {
                frame_index: frame,
                timestamp,
                track_hint: Some(w.hint),
                bbox,
                source: Source::Tracker,
            };
            if frame % DETECTOR_PERIOD == 0 {
                detections.push(Detection {
                    source: Source::Detector,
                    ..row.clone()
                });
            }
            detections.push(row);
            let s = seen[i].get_or_insert((timestamp, timestamp));
            s.1 = timestamp;
        }
    }
    // tracker rows first within a frame, detector rows after
    detections.sort_by_key(|d| (d.frame_index, d.source == Source::Detector));
    let labels = walkers
        .iter()
        .zip(&seen)
        .filter_map(|(w, s)| {
            s.map(|(start, end)| Label {
                track_hint: w.hint,
                start,
                end,
                kind: w.kind,
            })
        })
        .collect();
    (detections, labels)
}

fn default_name(kind: ScenarioKind, p: &ScenarioParams) -> String {
    let minutes = (p.start_hour * 60.0).round() as u32;
    format!("{kind}-{:02}{:02}", minutes / 60, minutes % 60)
}

/// Synthetic detection stream with ground-truth labels. Same inputs, same output.
pub fn generate_scenario(
    kind: ScenarioKind,
    params: &ScenarioParams,
    seed: u64,
) -> Result<Scenario, HarnessError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let people = walkers(kind, params, &mut rng);
    let (detections, labels) = render(&people, params, &mut rng);
    let notes = match kind {
        ScenarioKind::StraightWalk => {
            format!("{} walker(s) crossing at normal pace", params.people)
        }
        ScenarioKind::Loiter => {
            format!(
                "loiterer with {} reversals and {} stops",
                params.reversals, params.stops
            )
        }
        ScenarioKind::NightWalk => "quick crossing at night".into(),
        ScenarioKind::Crowd => format!("{} people crossing", params.people),
        ScenarioKind::OcclusionDropout => {
            format!(
                "crossing with {:.0}% of boxes occluded and overlapping boxes merged",
                params.dropout * 100.0
            )
        }
    };
    let mut scenario = Scenario {
        name: default_name(kind, params),
        kind,
        seed,
        params: params.clone(),
        detections,
        labels,
        notes,
    };
    if kind == ScenarioKind::OcclusionDropout {
        scenario = apply_dropout(&scenario, params.dropout, seed);
        scenario.name = default_name(kind, params);
    }
    Ok(scenario)
}

/// Removes each person's boxes for random spans covering about `fraction` of their
/// visible time and merges overlapping detector boxes. Labels are unchanged.
pub fn apply_dropout(scenario: &Scenario, fraction: f64, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0cc1_0de5);
    let mut hidden: Vec<(u64, f64, f64)> = Vec::new();
    for label in &scenario.labels {
        let span = label.end - label.start;
        let target = span * fraction.clamp(0.0, 0.9);
        let mut covered = 0.0;
        let mut attempts = 0;
        while covered + 1e-9 < target && attempts < 1000 {
            attempts += 1;
            let len = DROPOUT_CHUNK.min(target - covered).max(1.0);
            if span <= len {
                break;
            }
            let s = label.start + rng.gen_range(0.0..span - len);
            let overlaps = hidden
                .iter()
                .any(|&(h, a, b)| h == label.track_hint && s < b + 1.0 && s + len > a - 1.0);
            if !overlaps {
                hidden.push((label.track_hint, s, s + len));
                covered += len;
            }
        }
    }
    let visible = |d: &Detection| {
        !hidden
            .iter()
            .any(|&(h, a, b)| d.track_hint == Some(h) && d.timestamp >= a && d.timestamp <= b)
    };
    let mut out: Vec<Detection> = Vec::with_capacity(scenario.detections.len());
    let mut i = 0;
    let rows = &scenario.detections;
    while i < rows.len() {
        let frame = rows[i].frame_index;
        let mut j = i;
        while j < rows.len() && rows[j].frame_index == frame {
            j += 1;
        }
        let kept: Vec<&Detection> = rows[i..j].iter().filter(|d| visible(d)).collect();
        out.extend(
            kept.iter()
                .filter(|d| d.source == Source::Tracker)
                .map(|d| (*d).clone()),
        );
        let mut merged: Vec<Detection> = Vec::new();
        for d in kept.into_iter().filter(|d| d.source == Source::Detector) {
            match merged.iter_mut().find(|m| intersects(&m.bbox, &d.bbox)) {
                Some(m) => m.bbox = union(&m.bbox, &d.bbox),
                None => merged.push(d.clone()),
            }
        }
        out.extend(merged);
        i = j;
    }
    Scenario {
        name: format!("{}-dropout", scenario.name),
        detections: out,
        notes: format!("{}; {:.0}% occluded", scenario.notes, fraction * 100.0),
        ..scenario.clone()
    }
}

fn intersects(a: &BBox, b: &BBox) -> bool {
    a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h
}

fn union(a: &BBox, b: &BBox) -> BBox {
    let (x0, y0) = (a.x.min(b.x), a.y.min(b.y));
    let (x1, y1) = ((a.x + a.w).max(b.x + b.w), (a.y + a.h).max(b.y + b.h));
    BBox::new(x0, y0, x1 - x0, y1 - y0)
}

/// The fixed 12-scenario evaluation suite: four night-time loiterers and eight normal scenes.
pub fn default_suite(seed: u64) -> Result<Vec<Scenario>, HarnessError> {
    use ScenarioKind::*;
    let d = ScenarioParams::defaults;
    let specs: Vec<(&str, ScenarioKind, ScenarioParams)> = vec![
        ("01-loiter-0300", Loiter, d(Loiter)),
        (
            "02-loiter-0100",
            Loiter,
            ScenarioParams {
                start_hour: 1.0,
                duration: 90.0,
                ..d(Loiter)
            },
        ),
        (
            "03-loiter-2300",
            Loiter,
            ScenarioParams {
                start_hour: 23.0,
                duration: 100.0,
                reversals: 5,
                stops: 1,
                ..d(Loiter)
            },
        ),
        (
            "04-loiter-0200",
            Loiter,
            ScenarioParams {
                start_hour: 2.0,
                duration: 150.0,
                reversals: 6,
                stops: 3,
                people: 2,
                ..d(Loiter)
            },
        ),
        ("05-walk-1100", StraightWalk, d(StraightWalk)),
        (
            "06-walk-1430",
            StraightWalk,
            ScenarioParams {
                start_hour: 14.5,
                duration: 60.0,
                ..d(StraightWalk)
            },
        ),
        (
            "07-two-walkers-1000",
            StraightWalk,
            ScenarioParams {
                start_hour: 10.0,
                duration: 40.0,
                people: 2,
                ..d(StraightWalk)
            },
        ),
        ("08-crowd-1300", Crowd, d(Crowd)),
        (
            "09-evening-walk-1900",
            StraightWalk,
            ScenarioParams {
                start_hour: 19.0,
                duration: 15.0,
                ..d(StraightWalk)
            },
        ),
        ("10-night-walk-0300", NightWalk, d(NightWalk)),
        ("11-occlusion-1000", OcclusionDropout, d(OcclusionDropout)),
        (
            "12-meander-1500",
            StraightWalk,
            ScenarioParams {
                start_hour: 15.0,
                duration: 60.0,
                turns: 3,
                ..d(StraightWalk)
            },
        ),
    ];
    specs
        .into_iter()
        .enumerate()
        .map(|(i, (name, kind, params))| {
            let mut s = generate_scenario(kind, &params, seed.wrapping_add(i as u64))?;
            s.name = name.to_string();
            Ok(s)
        })
        .collect()
}
