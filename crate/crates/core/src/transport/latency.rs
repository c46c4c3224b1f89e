use std::fmt::Write as _;
use std::sync::Mutex;

use super::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatencySample {
    pub sequence: u32,
    pub mode: Mode,
    /// Bytes on the wire, length prefix included.
    pub bytes: usize,
    pub latency_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LatencyStats {
    pub count: usize,
    pub mean_us: f64,
    pub p95_us: f64,
    pub max_us: f64,
}

impl LatencyStats {
    /// All-zero stats for an empty input.
    pub fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            count: sorted.len(),
            mean_us: sorted.iter().sum::<f64>() / sorted.len() as f64,
            p95_us: percentile(&sorted, 0.95),
            max_us: sorted[sorted.len() - 1],
        }
    }

    pub fn from_samples(samples: &[LatencySample]) -> Self {
        Self::from_values(
            &samples
                .iter()
                .map(|s| s.latency_us as f64)
                .collect::<Vec<_>>(),
        )
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

/// Nearest-rank percentile of an ascending slice; 0 for an empty one.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q.clamp(0.0, 1.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// `sequence,mode,bytes,latency_us` with a header line.
pub fn latency_csv(samples: &[LatencySample]) -> String {
    let mut out = String::from("sequence,mode,bytes,latency_us\n");
    for s in samples {
        writeln!(
            out,
            "{},{},{},{}",
            s.sequence, s.mode, s.bytes, s.latency_us
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Default)]
pub struct LatencyLog {
    samples: Mutex<Vec<LatencySample>>,
}

impl LatencyLog {
    pub fn record(&self, sample: LatencySample) {
        self.samples.lock().unwrap().push(sample);
    }

    pub fn samples(&self) -> Vec<LatencySample> {
        self.samples.lock().unwrap().clone()
    }

    pub fn stats(&self) -> LatencyStats {
        LatencyStats::from_samples(&self.samples.lock().unwrap())
    }

    pub fn clear(&self) {
        self.samples.lock().unwrap().clear();
    }
}
