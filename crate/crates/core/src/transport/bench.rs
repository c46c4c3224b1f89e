use std::ops::RangeInclusive;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::edge::{EdgeSender, EdgeStats};
use super::fog::{Delivered, FogServer, Handler};
use super::latency::LatencySample;
use super::session::SessionSetup;
use super::{TransportConfig, TransportError};
use crate::fuzzy::MemoryErrorLog;
use crate::track::{FeatureRecord, ObjectFeatures};

/// Result of streaming a batch of records over a fresh loopback connection.
#[derive(Debug, Clone)]
pub struct LoopbackRun {
    pub received: Vec<(u32, FeatureRecord)>,
    pub latency: Vec<LatencySample>,
    pub setup: SessionSetup,
    pub edge: EdgeStats,
    pub log: Vec<String>,
}

/// Streams `records` from an edge sender to a fog server on 127.0.0.1 and
/// waits until the fog has handed every record to `on_record`.
pub fn loopback_stream(
    config: &TransportConfig,
    camera_id: &str,
    records: &[FeatureRecord],
    on_record: Option<Handler>,
) -> Result<LoopbackRun, TransportError> {
    let received: Arc<Mutex<Vec<(u32, FeatureRecord)>>> = Arc::default();
    let handler: Handler = {
        let received = received.clone();
        Arc::new(move |d: Delivered| {
            received
                .lock()
                .unwrap()
                .push((d.sequence, d.record.clone()));
            if let Some(h) = &on_record {
                h(d);
            }
        })
    };
    let log = Arc::new(MemoryErrorLog::new());
    let server = FogServer::bind("127.0.0.1:0", config.clone(), handler, log.clone())?;
    let mut edge =
        EdgeSender::connect(server.local_addr(), camera_id, config.clone(), log.clone())?;
    let setup = edge.setup().unwrap_or_default();
    for r in records {
        edge.send(r)?;
    }
    let edge = edge.finish(Duration::from_secs(60))?;
    let latency = server.latency();
    server.shutdown();
    let received = std::mem::take(&mut *received.lock().unwrap());
    Ok(LoopbackRun {
        received,
        latency,
        setup,
        edge,
        log: log.lines(),
    })
}

/// Seeded random records at 5 fps from `start`, each with a uniform number of objects in `objects`.
pub fn synthetic_records(
    n: usize,
    objects: RangeInclusive<usize>,
    start: f64,
    seed: u64,
) -> Vec<FeatureRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let k = rng.gen_range(objects.clone());
            FeatureRecord {
                frame_index: i as u64,
                timestamp: start + i as f64 * 0.2,
                people_count: k as u32,
                objects: (0..k)
                    .map(|j| ObjectFeatures {
                        track_id: j as u64 + 1,
                        dwell_time: rng.gen_range(0.0..120.0),
                        speed_changes: rng.gen_range(0..20),
                        direction_changes: rng.gen_range(0..20),
                    })
                    .collect(),
            }
        })
        .collect()
}
