use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use super::{alarm_threshold, contextualize, ContextConfig, ContextError, ContextualizedFeatures};
use crate::fuzzy::{ErrorLog, FuzzyEngine, ScoreStatus, SuspicionScore};
use crate::track::FeatureRecord;

/// Per-object outcome of one fog decision.
#[derive(Debug, Clone, PartialEq)]
pub struct SuspicionReport {
    pub camera_id: String,
    pub track_id: u64,
    pub timestamp: f64,
    pub score: SuspicionScore,
    pub threshold_used: f64,
    /// Raised iff the score is ok and at or above the threshold.
    pub alarm: bool,
}

pub fn decision_log_header() -> &'static str {
    "timestamp,camera_id,track_id,score,threshold,alarm,status"
}

pub fn format_decision_line(r: &SuspicionReport) -> String {
    format!(
        "{:.3},{},{},{:.4},{:.2},{},{}",
        r.timestamp,
        r.camera_id,
        r.track_id,
        r.score.value,
        r.threshold_used,
        r.alarm,
        r.score.status.as_str()
    )
}

/// Append-only sink for decisions.
pub trait DecisionLog: Send + Sync {
    fn append(&self, report: &SuspicionReport);
}

#[derive(Debug, Default)]
pub struct MemoryDecisionLog {
    reports: Mutex<Vec<SuspicionReport>>,
}

impl MemoryDecisionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reports(&self) -> Vec<SuspicionReport> {
        self.reports.lock().unwrap().clone()
    }

    /// Header plus one CSV line per decision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(decision_log_header());
        out.push('\n');
        for r in self.reports.lock().unwrap().iter() {
            out.push_str(&format_decision_line(r));
            out.push('\n');
        }
        out
    }
}

impl DecisionLog for MemoryDecisionLog {
    fn append(&self, report: &SuspicionReport) {
        self.reports.lock().unwrap().push(report.clone());
    }
}

pub struct FileDecisionLog {
    out: Mutex<BufWriter<File>>,
}

impl FileDecisionLog {
    /// Creates (truncating) the log and writes the CSV header.
    pub fn create(path: impl AsRef<Path>) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", decision_log_header())?;
        Ok(Self {
            out: Mutex::new(out),
        })
    }

    pub fn flush(&self) -> io::Result<()> {
        self.out.lock().unwrap().flush()
    }
}

impl DecisionLog for FileDecisionLog {
    fn append(&self, report: &SuspicionReport) {
        let _ = writeln!(self.out.lock().unwrap(), "{}", format_decision_line(report));
    }
}

impl Drop for FileDecisionLog {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

/// Scores one contextualized object and applies the threshold policy.
pub fn decide(
    cf: &ContextualizedFeatures,
    engine: &FuzzyEngine,
    config: &ContextConfig,
    error_log: &dyn ErrorLog,
) -> Result<SuspicionReport, ContextError> {
    let ctx = config.camera(&cf.camera_id)?;
    let score =
        engine.score_object(&cf.object_id(), cf.timestamp, &cf.score_inputs(), error_log)?;
    let threshold_used = alarm_threshold(&config.policy, ctx, cf.hour_of_day);
    let alarm = score.status == ScoreStatus::Ok && score.value >= threshold_used;
    Ok(SuspicionReport {
        camera_id: cf.camera_id.clone(),
        track_id: cf.track_id,
        timestamp: cf.timestamp,
        score,
        threshold_used,
        alarm,
    })
}

/// Fog decision stage: contextualizes records, scores each object and logs the reports.
///
/// Stateless per record; the engine can be swapped wholesale while decisions are running.
pub struct DecisionMaker {
    engine: RwLock<Arc<FuzzyEngine>>,
    config: ContextConfig,
    error_log: Arc<dyn ErrorLog>,
    decision_log: Arc<dyn DecisionLog>,
}

impl DecisionMaker {
    pub fn new(
        engine: Arc<FuzzyEngine>,
        config: ContextConfig,
        error_log: Arc<dyn ErrorLog>,
        decision_log: Arc<dyn DecisionLog>,
    ) -> Self {
        Self {
            engine: RwLock::new(engine),
            config,
            error_log,
            decision_log,
        }
    }

    pub fn engine(&self) -> Arc<FuzzyEngine> {
        self.engine.read().unwrap().clone()
    }

    pub fn reload_engine(&self, engine: FuzzyEngine) {
        *self.engine.write().unwrap() = Arc::new(engine);
    }

    pub fn config(&self) -> &ContextConfig {
        &self.config
    }

    pub fn decide(&self, cf: &ContextualizedFeatures) -> Result<SuspicionReport, ContextError> {
        let engine = self.engine();
        let report = decide(cf, &engine, &self.config, self.error_log.as_ref())?;
        self.decision_log.append(&report);
        Ok(report)
    }

    /// Contextualizes and decides every object of a record from `camera_id`.
    pub fn process_record(
        &self,
        camera_id: &str,
        record: &FeatureRecord,
    ) -> Result<Vec<SuspicionReport>, ContextError> {
        let ctx = match self.config.camera(camera_id) {
            Ok(ctx) => ctx,
            Err(e) => {
                self.error_log
                    .append(record.timestamp, &format!("{camera_id}/-"), &e.to_string());
                return Err(e);
            }
        };
        contextualize(record, ctx)?
            .iter()
            .map(|cf| self.decide(cf))
            .collect()
    }
}
