use std::collections::HashMap;
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::sync_channel;
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use super::latency::{LatencyLog, LatencySample};
use super::session::{refuse, Session};
use super::wire::{decode_record, now_micros, read_frame, write_frame, FrameKind, Header};
use super::{Mode, TransportConfig, TransportError};
use crate::fuzzy::ErrorLog;
use crate::track::FeatureRecord;

/// A record accepted by the fog, in per-connection arrival order.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivered {
    pub camera_id: String,
    pub sequence: u32,
    pub record: FeatureRecord,
    pub mode: Mode,
    pub bytes: usize,
    pub latency_us: u64,
}

pub type Handler = Arc<dyn Fn(Delivered) + Send + Sync>;

/// Sequencing counters for one camera stream, kept across reconnects.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StreamStats {
    pub accepted: u64,
    pub gaps: u64,
    pub missing: u64,
    pub duplicates: u64,
    pub last_sequence: Option<u32>,
}

enum Verdict {
    Accept,
    Duplicate(u32),
}

struct Shared {
    config: TransportConfig,
    handler: Handler,
    log: Arc<dyn ErrorLog>,
    latency: LatencyLog,
    streams: Mutex<HashMap<String, StreamStats>>,
    live: Mutex<HashMap<u64, TcpStream>>,
    rejected: AtomicU64,
}

impl Shared {
    fn note(&self, who: &str, msg: &str) {
        self.log.append(now_micros() as f64 / 1e6, who, msg);
    }

    fn sequence(&self, camera: &str, seq: u32, first_on_connection: bool) -> Verdict {
        let mut streams = self.streams.lock().unwrap();
        let st = streams.entry(camera.to_string()).or_default();
        match st.last_sequence {
            Some(_) if first_on_connection && seq == 0 => {
                self.note(camera, "stream restarted at sequence 0");
            }
            Some(last) if seq <= last => {
                st.duplicates += 1;
                self.note(
                    camera,
                    &format!("duplicate sequence {seq} rejected (last {last})"),
                );
                return Verdict::Duplicate(last);
            }
            Some(last) if seq > last + 1 => {
                let missing = (seq - last - 1) as u64;
                st.gaps += 1;
                st.missing += missing;
                self.note(
                    camera,
                    &format!(
                        "sequence gap: expected {}, got {seq} ({missing} missing)",
                        last + 1
                    ),
                );
            }
            _ => {}
        }
        st.last_sequence = Some(seq);
        st.accepted += 1;
        Verdict::Accept
    }
}

/// Fog-side listener. Each connection gets a reader thread and a worker that
/// feeds the handler from a bounded queue.
pub struct FogServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
    connections: Arc<Mutex<Vec<JoinHandle<()>>>>,
}

impl FogServer {
    pub fn bind(
        addr: impl ToSocketAddrs,
        config: TransportConfig,
        handler: Handler,
        log: Arc<dyn ErrorLog>,
    ) -> Result<Self, TransportError> {
        config.validate()?;
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            config,
            handler,
            log,
            latency: LatencyLog::default(),
            streams: Mutex::new(HashMap::new()),
            live: Mutex::new(HashMap::new()),
            rejected: AtomicU64::new(0),
        });
        let stop = Arc::new(AtomicBool::new(false));
        let connections: Arc<Mutex<Vec<JoinHandle<()>>>> = Arc::default();

        let acceptor = {
            let (shared, stop, connections) = (shared.clone(), stop.clone(), connections.clone());
            thread::Builder::new()
                .name("fog-accept".into())
                .spawn(move || {
                    let mut next_id = 0u64;
                    for stream in listener.incoming() {
                        if stop.load(Ordering::SeqCst) {
                            break;
                        }
                        let Ok(stream) = stream else { continue };
                        let (id, shared) = (next_id, shared.clone());
                        next_id += 1;
                        let handle = thread::Builder::new()
                            .name(format!("fog-conn-{id}"))
                            .spawn(move || serve(id, stream, &shared))
                            .expect("spawn connection thread");
                        connections.lock().unwrap().push(handle);
                    }
                })?
        };
        Ok(Self {
            addr,
            shared,
            stop,
            acceptor: Some(acceptor),
            connections,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn latency(&self) -> Vec<LatencySample> {
        self.shared.latency.samples()
    }

    pub fn clear_latency(&self) {
        self.shared.latency.clear();
    }

    pub fn stream_stats(&self, camera_id: &str) -> Option<StreamStats> {
        self.shared.streams.lock().unwrap().get(camera_id).cloned()
    }

    /// Frames or sessions refused for failing authentication, mode or format checks.
    pub fn rejected(&self) -> u64 {
        self.shared.rejected.load(Ordering::SeqCst)
    }

    /// Drops every open connection, as a network fault would.
    pub fn disconnect_all(&self) {
        for s in self.shared.live.lock().unwrap().values() {
            let _ = s.shutdown(Shutdown::Both);
        }
    }

    /// Stops accepting, closes open connections and waits for queued records to reach the handler.
    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        let Some(acceptor) = self.acceptor.take() else {
            return;
        };
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        let _ = acceptor.join();
        self.disconnect_all();
        let handles = std::mem::take(&mut *self.connections.lock().unwrap());
        for h in handles {
            let _ = h.join();
        }
    }
}

impl Drop for FogServer {
    fn drop(&mut self) {
        self.stop_and_join();
    }
}

fn serve(id: u64, mut stream: TcpStream, shared: &Arc<Shared>) {
    let _ = stream.set_nodelay(true);
    let peer = stream
        .peer_addr()
        .map(|a| a.to_string())
        .unwrap_or_else(|_| format!("conn-{id}"));
    let session = match Session::server(&mut stream, &shared.config) {
        Ok(s) => s,
        Err(e) => {
            shared.rejected.fetch_add(1, Ordering::SeqCst);
            shared.note(&peer, &format!("session refused: {e}"));
            return;
        }
    };
    if let Ok(clone) = stream.try_clone() {
        shared.live.lock().unwrap().insert(id, clone);
    }

    let (tx, rx) = sync_channel::<Delivered>(shared.config.queue_capacity);
    let handler = shared.handler.clone();
    let worker = thread::spawn(move || {
        for d in rx {
            handler(d);
        }
    });

    let mode = session.mode();
    let mut first = true;
    loop {
        let (header, body) = match read_frame(&mut stream) {
            Ok(Some(frame)) => frame,
            Ok(None) => break,
            Err(e) => {
                if !matches!(e, TransportError::Io(_)) {
                    shared.rejected.fetch_add(1, Ordering::SeqCst);
                    refuse(&mut stream, mode, &e.to_string());
                }
                shared.note(&peer, &format!("connection dropped: {e}"));
                break;
            }
        };
        let bytes = 4 + super::HEADER_LEN + body.len();
        let decoded = if header.kind != FrameKind::Data {
            Err(TransportError::Malformed(format!(
                "unexpected {:?} frame",
                header.kind
            )))
        } else {
            session
                .open(&header, &body)
                .and_then(|plain| decode_record(&plain))
        };
        let (camera_id, record) = match decoded {
            Ok(v) => v,
            Err(e) => {
                shared.rejected.fetch_add(1, Ordering::SeqCst);
                shared.note(&peer, &format!("frame {} rejected: {e}", header.sequence));
                refuse(&mut stream, mode, &e.to_string());
                break;
            }
        };
        let ack_seq = match shared.sequence(&camera_id, header.sequence, first) {
            Verdict::Duplicate(last) => last,
            Verdict::Accept => {
                let latency_us = now_micros().saturating_sub(header.sent_at_us);
                shared.latency.record(LatencySample {
                    sequence: header.sequence,
                    mode,
                    bytes,
                    latency_us,
                });
                let d = Delivered {
                    camera_id,
                    sequence: header.sequence,
                    record,
                    mode,
                    bytes,
                    latency_us,
                };
                if tx.send(d).is_err() {
                    break;
                }
                header.sequence
            }
        };
        first = false;
        let ack = Header::new(mode, FrameKind::Ack, ack_seq);
        let sent = session
            .seal(&ack, &[])
            .and_then(|body| write_frame(&mut stream, &ack, &body));
        if sent.is_err() {
            break;
        }
    }
    shared.live.lock().unwrap().remove(&id);
    drop(tx);
    let _ = worker.join();
}
