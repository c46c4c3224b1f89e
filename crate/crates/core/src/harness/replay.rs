use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;

use super::scenario::Scenario;
use super::{HarnessError, Stage};
use crate::context::{ContextConfig, DecisionMaker, MemoryDecisionLog, ThresholdPolicy};
use crate::fuzzy::{FuzzyEngine, MemoryErrorLog};
use crate::track::{Detection, FeatureRecord, Tracker, TrackerParams};
use crate::transport::{Delivered, EdgeSender, FogServer, Handler, LatencySample, TransportConfig};

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    /// Frames per second; 0 replays as fast as possible.
    pub fps: f64,
    /// Stream records over a loopback connection instead of calling the fog in-process.
    pub transport: Option<TransportConfig>,
    pub tracker: TrackerParams,
    pub policy: ThresholdPolicy,
    /// Camera contexts; the scenario's own camera is used when absent.
    pub context: Option<ContextConfig>,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self {
            fps: 5.0,
            transport: None,
            tracker: TrackerParams::default(),
            policy: ThresholdPolicy::default(),
            context: None,
        }
    }
}

impl ReplayOptions {
    pub fn as_fast_as_possible() -> Self {
        Self {
            fps: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelineRow {
    pub timestamp: f64,
    pub track_id: u64,
    pub score: f64,
    pub alarm: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayOutput {
    pub scenario: String,
    pub timeline: Vec<TimelineRow>,
    /// Ground-truth identity the edge tracker attached to each track.
    pub track_hints: BTreeMap<u64, Option<u64>>,
    /// Decision log CSV.
    pub decisions: String,
    pub errors: Vec<String>,
    pub frames: usize,
    /// Wall time of each record's fog decision, in microseconds.
    pub decision_us: Vec<f64>,
    pub latency: Vec<LatencySample>,
    pub wall: Duration,
}

fn frames(detections: &[Detection]) -> impl Iterator<Item = &[Detection]> {
    detections.chunk_by(|a, b| a.frame_index == b.frame_index)
}

/// Drives a scenario through tracking, (optionally) transport, contextualization and scoring.
pub fn replay(
    scenario: &Scenario,
    engine: Arc<FuzzyEngine>,
    options: &ReplayOptions,
) -> Result<ReplayOutput, HarnessError> {
    let camera_id = scenario.camera().camera_id.clone();
    let context = match &options.context {
        Some(cfg) => {
            cfg.camera(&camera_id)
                .map_err(|e| HarnessError::stage(Stage::ContextFog, e))?;
            cfg.clone()
        }
        None => ContextConfig {
            policy: options.policy,
            ..ContextConfig::single(scenario.camera().clone())
        },
    };
    let decisions = Arc::new(MemoryDecisionLog::new());
    let errors = Arc::new(MemoryErrorLog::new());
    let maker = Arc::new(DecisionMaker::new(
        engine,
        context,
        errors.clone(),
        decisions.clone(),
    ));
    let mut tracker =
        Tracker::new(options.tracker).map_err(|e| HarnessError::stage(Stage::TrackFeatures, e))?;
    let mut hints = BTreeMap::new();
    let timings: Arc<Mutex<Vec<f64>>> = Arc::default();
    let started = Instant::now();

    let mut link = match &options.transport {
        None => None,
        Some(cfg) => {
            let failure: Arc<Mutex<Option<String>>> = Arc::default();
            let handler: Handler = {
                let (maker, timings, failure) = (maker.clone(), timings.clone(), failure.clone());
                Arc::new(move |d: Delivered| {
                    let t = Instant::now();
                    let result = maker.process_record(&d.camera_id, &d.record);
                    timings
                        .lock()
                        .unwrap()
                        .push(t.elapsed().as_secs_f64() * 1e6);
                    if let Err(e) = result {
                        failure.lock().unwrap().get_or_insert(e.to_string());
                    }
                })
            };
            let fog = FogServer::bind("127.0.0.1:0", cfg.clone(), handler, errors.clone())
                .map_err(|e| HarnessError::stage(Stage::Transport, e))?;
            let edge =
                EdgeSender::connect(fog.local_addr(), &camera_id, cfg.clone(), errors.clone())
                    .map_err(|e| HarnessError::stage(Stage::Transport, e))?;
            Some((fog, edge, failure))
        }
    };

    let first_frame = scenario.detections.first().map_or(0, |d| d.frame_index);
    let mut count = 0;
    for rows in frames(&scenario.detections) {
        let (frame, timestamp) = (rows[0].frame_index, rows[0].timestamp);
        if options.fps > 0.0 {
            let due = started + Duration::from_secs_f64((frame - first_frame) as f64 / options.fps);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
        }
        tracker
            .process_frame(frame, timestamp, rows)
            .map_err(|e| HarnessError::stage(Stage::TrackFeatures, e))?;
        for t in tracker.tracks() {
            let slot = hints.entry(t.track_id).or_insert(None);
            if t.hint.is_some() {
                *slot = t.hint;
            }
        }
        let record: FeatureRecord = tracker.build_feature_record(frame, timestamp);
        match link.as_mut() {
            None => {
                let t = Instant::now();
                maker
                    .process_record(&camera_id, &record)
                    .map_err(|e| HarnessError::stage(Stage::ContextFog, e))?;
                timings
                    .lock()
                    .unwrap()
                    .push(t.elapsed().as_secs_f64() * 1e6);
            }
            Some((_, edge, _)) => {
                edge.send(&record)
                    .map_err(|e| HarnessError::stage(Stage::Transport, e))?;
            }
        }
        count += 1;
    }

    let mut latency = Vec::new();
    if let Some((fog, edge, failure)) = link.take() {
        edge.finish(Duration::from_secs(60))
            .map_err(|e| HarnessError::stage(Stage::Transport, e))?;
        latency = fog.latency();
        fog.shutdown();
        if let Some(msg) = failure.lock().unwrap().take() {
            return Err(HarnessError::stage(Stage::ContextFog, msg));
        }
    }

    let timeline = decisions
        .reports()
        .iter()
        .map(|r| TimelineRow {
            timestamp: r.timestamp,
            track_id: r.track_id,
            score: r.score.value,
            alarm: r.alarm,
        })
        .collect();
    let decision_us = std::mem::take(&mut *timings.lock().unwrap());
    Ok(ReplayOutput {
        scenario: scenario.name.clone(),
        timeline,
        track_hints: hints,
        decisions: decisions.to_csv(),
        errors: errors.lines(),
        frames: count,
        decision_us,
        latency,
        wall: started.elapsed(),
    })
}

pub fn timeline_csv(rows: &[TimelineRow]) -> String {
    let mut out = String::from("timestamp,track_id,score,alarm\n");
    for r in rows {
        writeln!(
            out,
            "{:.3},{},{:.4},{}",
            r.timestamp, r.track_id, r.score, r.alarm
        )
        .unwrap();
    }
    out
}

pub fn track_hints_csv(hints: &BTreeMap<u64, Option<u64>>) -> String {
    let mut out = String::from("track_id,track_hint\n");
    for (id, hint) in hints {
        match hint {
            Some(h) => writeln!(out, "{id},{h}").unwrap(),
            None => writeln!(out, "{id},").unwrap(),
        }
    }
    out
}

#[derive(Deserialize)]
struct TimelineCsvRow {
    timestamp: f64,
    track_id: u64,
    score: f64,
    alarm: bool,
}

#[derive(Deserialize)]
struct HintCsvRow {
    track_id: u64,
    track_hint: Option<u64>,
}

fn parse_rows<T: for<'de> Deserialize<'de>>(
    text: &str,
    origin: &str,
) -> Result<Vec<T>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize()
        .map(|r| {
            r.map_err(|e| HarnessError::Dataset {
                origin: origin.to_string(),
                line: e.position().map_or(0, |p| p.line()),
                reason: e.to_string(),
            })
        })
        .collect()
}

pub fn read_timeline(text: &str, origin: &str) -> Result<Vec<TimelineRow>, HarnessError> {
    Ok(parse_rows::<TimelineCsvRow>(text, origin)?
        .into_iter()
        .map(|r| TimelineRow {
            timestamp: r.timestamp,
            track_id: r.track_id,
            score: r.score,
            alarm: r.alarm,
        })
        .collect())
}

pub fn read_track_hints(
    text: &str,
    origin: &str,
) -> Result<BTreeMap<u64, Option<u64>>, HarnessError> {
    Ok(parse_rows::<HintCsvRow>(text, origin)?
        .into_iter()
        .map(|r| (r.track_id, r.track_hint))
        .collect())
}
