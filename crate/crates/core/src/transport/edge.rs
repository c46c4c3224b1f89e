use std::collections::VecDeque;
use std::net::{Shutdown, SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::session::{Session, SessionSetup};
use super::wire::{encode_record, now_micros, read_frame, write_frame, FrameKind, Header};
use super::{TransportConfig, TransportError};
use crate::fuzzy::ErrorLog;
use crate::track::FeatureRecord;

const CONNECT_TIMEOUT: Duration = Duration::from_secs(2);
const POLL: Duration = Duration::from_millis(50);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeStats {
    /// Data frames written, retransmissions included.
    pub sent: u64,
    pub retransmitted: u64,
    /// Records evicted from the disconnect buffer.
    pub dropped: u64,
    pub disconnects: u64,
    pub reconnects: u64,
}

struct Pending {
    sequence: u32,
    timestamp: f64,
    body: Vec<u8>,
    attempts: u32,
}

#[derive(Debug, Clone)]
struct Closed {
    reason: String,
    refused: bool,
}

#[derive(Default)]
struct AckState {
    acked: Option<u32>,
    closed: Option<Closed>,
}

type AckCell = Arc<(Mutex<AckState>, Condvar)>;

struct Link {
    stream: TcpStream,
    session: Session,
    acks: AckCell,
    reader: Option<JoinHandle<()>>,
    unacked: VecDeque<Pending>,
}

impl Link {
    /// Blocks until fewer than `limit` frames are unacknowledged. `Ok(false)` on deadline.
    fn wait_below(&mut self, limit: usize, deadline: Option<Instant>) -> Result<bool, Closed> {
        let (lock, cv) = &*self.acks;
        let mut st = lock.lock().unwrap();
        loop {
            if let Some(acked) = st.acked {
                while self.unacked.front().is_some_and(|p| p.sequence <= acked) {
                    self.unacked.pop_front();
                }
            }
            if let Some(closed) = &st.closed {
                return Err(closed.clone());
            }
            if self.unacked.len() < limit {
                return Ok(true);
            }
            let wait = match deadline {
                Some(d) => match d.checked_duration_since(Instant::now()) {
                    Some(left) => left.min(POLL),
                    None => return Ok(false),
                },
                None => POLL,
            };
            st = cv.wait_timeout(st, wait).unwrap().0;
        }
    }

    fn close(mut self) -> VecDeque<Pending> {
        let _ = self.stream.shutdown(Shutdown::Both);
        if let Some(r) = self.reader.take() {
            let _ = r.join();
        }
        let acked = self.acks.0.lock().unwrap().acked;
        if let Some(acked) = acked {
            self.unacked.retain(|p| p.sequence > acked);
        }
        self.unacked
    }
}

fn read_acks(mut stream: TcpStream, session: Session, acks: AckCell) {
    let closed = loop {
        match read_frame(&mut stream) {
            Ok(Some((h, body))) => match h.kind {
                FrameKind::Ack => {
                    if session.open(&h, &body).is_err() {
                        break Closed {
                            reason: "ack failed authentication".into(),
                            refused: false,
                        };
                    }
                    let mut st = acks.0.lock().unwrap();
                    st.acked = Some(st.acked.map_or(h.sequence, |a| a.max(h.sequence)));
                    acks.1.notify_all();
                }
                FrameKind::Refuse => {
                    break Closed {
                        reason: String::from_utf8_lossy(&body).into_owned(),
                        refused: true,
                    };
                }
                other => {
                    break Closed {
                        reason: format!("unexpected {other:?} frame"),
                        refused: false,
                    }
                }
            },
            Ok(None) => {
                break Closed {
                    reason: "peer closed the connection".into(),
                    refused: false,
                }
            }
            Err(e) => {
                break Closed {
                    reason: e.to_string(),
                    refused: false,
                }
            }
        }
    };
    acks.0.lock().unwrap().closed = Some(closed);
    acks.1.notify_all();
}

/// Edge-side sender for one camera.
///
/// Sequence numbers continue across reconnects. While disconnected, records
/// are buffered up to `buffer_seconds` of record time; older ones are dropped
/// and logged. Unacknowledged frames are resent after a reconnect.
pub struct EdgeSender {
    addr: SocketAddr,
    camera_id: String,
    config: TransportConfig,
    log: Arc<dyn ErrorLog>,
    link: Option<Link>,
    backlog: VecDeque<Pending>,
    next_sequence: u32,
    last_attempt: Option<Instant>,
    last_close: Option<Closed>,
    stats: EdgeStats,
}

impl EdgeSender {
    pub fn connect(
        addr: impl ToSocketAddrs,
        camera_id: &str,
        config: TransportConfig,
        log: Arc<dyn ErrorLog>,
    ) -> Result<Self, TransportError> {
        config.validate()?;
        encode_record(camera_id, &FeatureRecord::empty(0, 0.0))?;
        let addr = addr
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| TransportError::Config("address resolves to nothing".into()))?;
        let mut sender = Self {
            addr,
            camera_id: camera_id.to_string(),
            config,
            log,
            link: None,
            backlog: VecDeque::new(),
            next_sequence: 0,
            last_attempt: None,
            last_close: None,
            stats: EdgeStats::default(),
        };
        sender.link = Some(sender.open_link()?);
        Ok(sender)
    }

    pub fn stats(&self) -> EdgeStats {
        self.stats
    }

    pub fn is_connected(&self) -> bool {
        self.link.is_some()
    }

    /// Records waiting for a connection.
    pub fn buffered(&self) -> usize {
        self.backlog.len()
    }

    pub fn setup(&self) -> Option<SessionSetup> {
        self.link.as_ref().map(|l| l.session.setup)
    }

    pub fn next_sequence(&self) -> u32 {
        self.next_sequence
    }

    fn note(&self, msg: &str) {
        self.log
            .append(now_micros() as f64 / 1e6, &self.camera_id, msg);
    }

    fn open_link(&mut self) -> Result<Link, TransportError> {
        self.last_attempt = Some(Instant::now());
        let mut stream = TcpStream::connect_timeout(&self.addr, CONNECT_TIMEOUT)?;
        stream.set_nodelay(true)?;
        let session = Session::client(&mut stream, &self.config)?;
        let acks: AckCell = Arc::default();
        let reader = {
            let (stream, session, acks) = (stream.try_clone()?, session.clone(), acks.clone());
            thread::Builder::new()
                .name("edge-acks".into())
                .spawn(move || read_acks(stream, session, acks))?
        };
        Ok(Link {
            stream,
            session,
            acks,
            reader: Some(reader),
            unacked: VecDeque::new(),
        })
    }

    /// Queues a record and pushes as much of the backlog as the window allows.
    ///
    /// Blocks while the in-flight window is full. Connection loss is not an
    /// error here; the record stays buffered.
    pub fn send(&mut self, record: &FeatureRecord) -> Result<u32, TransportError> {
        let body = encode_record(&self.camera_id, record)?;
        let sequence = self.next_sequence;
        self.next_sequence = sequence
            .checked_add(1)
            .ok_or_else(|| TransportError::Config("sequence space exhausted".into()))?;
        self.backlog.push_back(Pending {
            sequence,
            timestamp: record.timestamp,
            body,
            attempts: 0,
        });
        self.pump();
        Ok(sequence)
    }

    /// Connects now, ignoring the reconnect interval.
    pub fn reconnect(&mut self) -> Result<(), TransportError> {
        if self.link.is_none() {
            let link = self.open_link()?;
            self.link = Some(link);
            self.stats.reconnects += 1;
            self.note("reconnected");
        }
        self.pump();
        Ok(())
    }

    fn pump(&mut self) {
        loop {
            if self.link.is_none() && !self.try_reconnect() {
                self.trim_backlog();
                return;
            }
            if self.backlog.is_empty() {
                return;
            }
            let window = self.config.window;
            let link = self.link.as_mut().expect("connected");
            if let Err(closed) = link.wait_below(window, None) {
                self.drop_link(closed);
                continue;
            }
            let mut p = self.backlog.pop_front().expect("non-empty");
            let header = Header::new(link.session.mode(), FrameKind::Data, p.sequence);
            let written = link
                .session
                .seal(&header, &p.body)
                .and_then(|body| write_frame(&mut link.stream, &header, &body));
            match written {
                Ok(_) => {
                    if p.attempts > 0 {
                        self.stats.retransmitted += 1;
                    }
                    p.attempts += 1;
                    self.stats.sent += 1;
                    link.unacked.push_back(p);
                }
                Err(e) => {
                    self.backlog.push_front(p);
                    self.drop_link(Closed {
                        reason: e.to_string(),
                        refused: false,
                    });
                }
            }
        }
    }

    fn try_reconnect(&mut self) -> bool {
        let interval = Duration::from_millis(self.config.reconnect_interval_ms);
        if self.last_attempt.is_some_and(|t| t.elapsed() < interval) {
            return false;
        }
        match self.open_link() {
            Ok(link) => {
                self.link = Some(link);
                self.stats.reconnects += 1;
                self.note("reconnected");
                true
            }
            Err(e) => {
                self.last_close = Some(Closed {
                    reason: e.to_string(),
                    refused: matches!(e, TransportError::Refused(_)),
                });
                self.note(&format!("reconnect failed: {e}"));
                false
            }
        }
    }

    fn drop_link(&mut self, closed: Closed) {
        let Some(link) = self.link.take() else { return };
        let requeued = link.close();
        let n = requeued.len();
        for p in requeued.into_iter().rev() {
            self.backlog.push_front(p);
        }
        self.stats.disconnects += 1;
        self.last_attempt = Some(Instant::now());
        self.note(&format!(
            "connection lost: {}; {n} unacknowledged records requeued",
            closed.reason
        ));
        self.last_close = Some(closed);
    }

    fn trim_backlog(&mut self) {
        let Some(newest) = self.backlog.back().map(|p| p.timestamp) else {
            return;
        };
        let horizon = newest - self.config.buffer_seconds;
        while self.backlog.front().is_some_and(|p| p.timestamp < horizon) {
            let p = self.backlog.pop_front().expect("non-empty");
            self.stats.dropped += 1;
            self.note(&format!(
                "buffer full: dropped record {} at t={:.3}",
                p.sequence, p.timestamp
            ));
        }
    }

    /// Waits until every record is acknowledged, then closes the connection.
    pub fn finish(mut self, timeout: Duration) -> Result<EdgeStats, TransportError> {
        let deadline = Instant::now() + timeout;
        loop {
            self.pump();
            if let Some(link) = self.link.as_mut() {
                match link.wait_below(1, Some(Instant::now() + POLL)) {
                    Ok(true) if self.backlog.is_empty() => break,
                    Ok(_) => {}
                    Err(closed) => self.drop_link(closed),
                }
            } else {
                thread::sleep(POLL);
            }
            if Instant::now() >= deadline {
                let pending =
                    self.backlog.len() + self.link.as_ref().map_or(0, |l| l.unacked.len());
                return Err(match &self.last_close {
                    Some(c) if c.refused => TransportError::Refused(c.reason.clone()),
                    Some(c) => TransportError::Timeout(format!(
                        "{pending} records undelivered; last error: {}",
                        c.reason
                    )),
                    None => TransportError::Timeout(format!("{pending} records undelivered")),
                });
            }
        }
        if let Some(link) = self.link.take() {
            link.close();
        }
        Ok(self.stats)
    }
}

impl Drop for EdgeSender {
    fn drop(&mut self) {
        if let Some(link) = self.link.take() {
            link.close();
        }
    }
}
