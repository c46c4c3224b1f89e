use std::time::Instant;

use crate::transport::LatencyStats;

/// Linux reports process times in clock ticks; 100 Hz on every mainstream kernel config.
const TICKS_PER_SECOND: f64 = 100.0;

fn process_cpu_seconds() -> Option<f64> {
    let stat = std::fs::read_to_string("/proc/self/stat").ok()?;
    // fields after the parenthesised command name; utime and stime are the 12th and 13th
    let rest = &stat[stat.rfind(')')? + 2..];
    let fields: Vec<&str> = rest.split_whitespace().collect();
    let utime: f64 = fields.get(11)?.parse().ok()?;
    let stime: f64 = fields.get(12)?.parse().ok()?;
    Some((utime + stime) / TICKS_PER_SECOND)
}

fn peak_rss_mb() -> Option<f64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb / 1024.0)
}

/// Process CPU time at a point, for measuring a span.
#[derive(Debug, Clone, Copy)]
pub struct RuntimeSnapshot {
    at: Instant,
    cpu_seconds: Option<f64>,
}

impl RuntimeSnapshot {
    pub fn now() -> Self {
        Self {
            at: Instant::now(),
            cpu_seconds: process_cpu_seconds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuntimeStats {
    pub records: usize,
    pub decision_mean_us: f64,
    pub decision_p95_us: f64,
    pub decision_max_us: f64,
    pub wall_seconds: f64,
    /// Process CPU time over wall time; above 100 when several threads are busy.
    pub cpu_percent: Option<f64>,
    pub peak_rss_mb: Option<f64>,
}

impl RuntimeStats {
    pub fn measure(decision_us: &[f64], since: &RuntimeSnapshot) -> Self {
        let s = LatencyStats::from_values(decision_us);
        let wall = since.at.elapsed().as_secs_f64();
        let cpu = match (since.cpu_seconds, process_cpu_seconds()) {
            (Some(a), Some(b)) if wall > 0.0 => Some(100.0 * (b - a) / wall),
            _ => None,
        };
        Self {
            records: s.count,
            decision_mean_us: s.mean_us,
            decision_p95_us: s.p95_us,
            decision_max_us: s.max_us,
            wall_seconds: wall,
            cpu_percent: cpu,
            peak_rss_mb: peak_rss_mb(),
        }
    }
}
