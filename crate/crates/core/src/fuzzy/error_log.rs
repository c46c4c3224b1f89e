use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat};

/// Append-only sink for erroneous-input acknowledgements.
pub trait ErrorLog: Send + Sync {
    fn append(&self, timestamp: f64, object_id: &str, reason: &str);
}

/// `ISO8601-timestamp TAB object-id TAB reason`, no trailing newline.
pub fn format_error_line(timestamp: f64, object_id: &str, reason: &str) -> String {
    let iso = if timestamp.is_finite() {
        DateTime::from_timestamp_micros((timestamp * 1e6).round() as i64)
            .map(|t| t.to_rfc3339_opts(SecondsFormat::Millis, true))
    } else {
        None
    }
    .unwrap_or_else(|| "invalid-timestamp".to_string());
    let clean = |s: &str| s.replace(['\t', '\n', '\r'], " ");
    format!("{iso}\t{}\t{}", clean(object_id), clean(reason))
}

#[derive(Debug, Default)]
pub struct MemoryErrorLog {
    lines: Mutex<Vec<String>>,
}

impl MemoryErrorLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lines(&self) -> Vec<String> {
        self.lines.lock().unwrap().clone()
    }
}

impl ErrorLog for MemoryErrorLog {
    fn append(&self, timestamp: f64, object_id: &str, reason: &str) {
        self.lines
            .lock()
            .unwrap()
            .push(format_error_line(timestamp, object_id, reason));
    }
}

pub struct FileErrorLog {
    out: Mutex<BufWriter<File>>,
}

impl FileErrorLog {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            out: Mutex::new(BufWriter::new(file)),
        })
    }
}

impl ErrorLog for FileErrorLog {
    fn append(&self, timestamp: f64, object_id: &str, reason: &str) {
        let mut out = self.out.lock().unwrap();
        // the log is best effort; a failed write must not block scoring
        let _ = writeln!(out, "{}", format_error_line(timestamp, object_id, reason));
        let _ = out.flush();
    }
}
