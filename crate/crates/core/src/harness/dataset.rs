use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scenario::{Label, LabelKind};
use super::{read_file, HarnessError};
use crate::track::{BBox, Detection, Source};

const DETECTION_HEADER: [&str; 8] = [
    "frame",
    "timestamp",
    "track_hint",
    "x",
    "y",
    "w",
    "h",
    "source",
];
const LABEL_HEADER: [&str; 4] = ["track_hint", "start", "end", "label"];

#[derive(Debug, Serialize, Deserialize)]
struct DetectionRow {
    frame: u64,
    timestamp: f64,
    track_hint: Option<u64>,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    source: Source,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    track_hint: u64,
    start: f64,
    end: f64,
    label: LabelKind,
}

fn err(origin: &str, line: u64, reason: impl Into<String>) -> HarnessError {
    HarnessError::Dataset {
        origin: origin.to_string(),
        line,
        reason: reason.into(),
    }
}

fn reader<R: Read>(
    input: R,
    origin: &str,
    expected: &[&str],
) -> Result<csv::Reader<R>, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| err(origin, 1, e.to_string()))?
        .clone();
    let got: Vec<&str> = headers.iter().collect();
    if got.len() == 1 && got[0].is_empty() {
        return Err(err(origin, 1, "missing header"));
    }
    if got != expected {
        let missing: Vec<&str> = expected
            .iter()
            .copied()
            .filter(|c| !got.contains(c))
            .collect();
        let reason = if missing.is_empty() {
            format!("header must be `{}`", expected.join(","))
        } else {
            format!("missing columns: {}", missing.join(", "))
        };
        return Err(err(origin, 1, reason));
    }
    Ok(rdr)
}

/// Parses a detection stream, checking that frames and timestamps never go backwards.
pub fn parse_track_dataset(input: impl Read, origin: &str) -> Result<Vec<Detection>, HarnessError> {
    let mut rdr = reader(input, origin, &DETECTION_HEADER)?;
    let mut out: Vec<Detection> = Vec::new();
    let mut raw = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut raw).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            err(origin, line, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = raw.position().map_or(0, |p| p.line());
        let row: DetectionRow = raw
            .deserialize(None)
            .map_err(|e| err(origin, line, e.to_string()))?;
        let bbox = BBox::new(row.x, row.y, row.w, row.h);
        if !row.timestamp.is_finite() {
            return Err(err(
                origin,
                line,
                format!("timestamp {} is not finite", row.timestamp),
            ));
        }
        if !bbox.is_valid() {
            return Err(err(
                origin,
                line,
                "box needs finite coordinates and positive size",
            ));
        }
        if let Some(prev) = out.last() {
            if row.frame < prev.frame_index {
                return Err(err(
                    origin,
                    line,
                    format!("frame {} after frame {}", row.frame, prev.frame_index),
                ));
            }
            let same_frame = row.frame == prev.frame_index;
            if (same_frame && row.timestamp != prev.timestamp)
                || (!same_frame && row.timestamp <= prev.timestamp)
            {
                return Err(err(
                    origin,
                    line,
                    format!(
                        "timestamp {} not after {} of frame {}",
                        row.timestamp, prev.timestamp, prev.frame_index
                    ),
                ));
            }
        }
        out.push(Detection {
            frame_index: row.frame,
            timestamp: row.timestamp,
            track_hint: row.track_hint,
            bbox,
            source: row.source,
        });
    }
    Ok(out)
}

pub fn load_track_dataset(path: impl AsRef<Path>) -> Result<Vec<Detection>, HarnessError> {
    let path = path.as_ref();
    parse_track_dataset(read_file(path)?.as_bytes(), &path.display().to_string())
}

pub fn write_track_dataset(detections: &[Detection]) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(DETECTION_HEADER).unwrap();
    for d in detections {
        w.serialize(DetectionRow {
            frame: d.frame_index,
            timestamp: d.timestamp,
            track_hint: d.track_hint,
            x: d.bbox.x,
            y: d.bbox.y,
            w: d.bbox.w,
            h: d.bbox.h,
            source: d.source,
        })
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub fn parse_labels(input: impl Read, origin: &str) -> Result<Vec<Label>, HarnessError> {
    let mut rdr = reader(input, origin, &LABEL_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.deserialize::<LabelRow>() {
        let row =
            rec.map_err(|e| err(origin, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        if !(row.start.is_finite() && row.end.is_finite() && row.start <= row.end) {
            return Err(err(
                origin,
                out.len() as u64 + 2,
                format!("interval [{}, {}] is invalid", row.start, row.end),
            ));
        }
        out.push(Label {
            track_hint: row.track_hint,
            start: row.start,
            end: row.end,
            kind: row.label,
        });
    }
    Ok(out)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<Label>, HarnessError> {
    let path = path.as_ref();
    parse_labels(read_file(path)?.as_bytes(), &path.display().to_string())
}

pub fn write_labels(labels: &[Label]) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(LABEL_HEADER).unwrap();
    for l in labels {
        w.serialize(LabelRow {
            track_hint: l.track_hint,
            start: l.start,
            end: l.end,
            label: l.kind,
        })
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}
