use std::collections::{BTreeMap, BTreeSet};

use super::replay::TimelineRow;
use super::scenario::{Label, LabelKind};

/// Seconds after a labeled interval during which an alarm still matches it.
pub const DEFAULT_MATCH_WINDOW: f64 = 5.0;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvaluationResult {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub loitering_events: usize,
    pub normal_labels: usize,
    /// Timeline rows that raised an alarm.
    pub alarms: usize,
}

/// Scores a timeline against ground truth.
///
/// An alarm on a track whose hint has a loitering label, inside
/// `[start, end + window]`, credits that label once (TP). An alarm inside a
/// normal label's window counts one FP per label. Any other alarm counts one FP
/// per track per `window` seconds. Loitering labels never credited are FN.
/// With `threshold` set, alarms are recomputed as `score >= threshold`;
/// otherwise the timeline's own alarm column is used.
pub fn evaluate(
    timeline: &[TimelineRow],
    hints: &BTreeMap<u64, Option<u64>>,
    labels: &[Label],
    threshold: Option<f64>,
    window: f64,
) -> EvaluationResult {
    let mut matched_loiter = BTreeSet::new();
    let mut flagged_normal = BTreeSet::new();
    let mut stray: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    let mut alarms = 0;

    for row in timeline {
        let alarm = match threshold {
            Some(t) => row.score >= t,
            None => row.alarm,
        };
        if !alarm {
            continue;
        }
        alarms += 1;
        let hint = hints.get(&row.track_id).copied().flatten();
        let within = |l: &&Label| {
            Some(l.track_hint) == hint
                && row.timestamp >= l.start
                && row.timestamp <= l.end + window
        };
        let candidates: Vec<(usize, &Label)> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| within(l))
            .collect();
        if let Some(&(i, _)) = candidates
            .iter()
            .find(|(_, l)| l.kind == LabelKind::Loitering)
        {
            matched_loiter.insert(i);
        } else if let Some(&(i, _)) = candidates.first() {
            flagged_normal.insert(i);
        } else {
            stray.entry(row.track_id).or_default().push(row.timestamp);
        }
    }

    let mut stray_fp = 0;
    for times in stray.values_mut() {
        times.sort_by(f64::total_cmp);
        let mut last: Option<f64> = None;
        for &t in times.iter() {
            if last.is_none_or(|l| t >= l + window) {
                stray_fp += 1;
                last = Some(t);
            }
        }
    }

    let loitering_events = labels
        .iter()
        .filter(|l| l.kind == LabelKind::Loitering)
        .count();
    EvaluationResult {
        tp: matched_loiter.len(),
        fp: flagged_normal.len() + stray_fp,
        fn_: loitering_events - matched_loiter.len(),
        loitering_events,
        normal_labels: labels.len() - loitering_events,
        alarms,
    }
}
