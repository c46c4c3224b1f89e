//! Edge-to-fog feature streaming over TCP.
//!
//! Every frame on the wire is
//!
//! ```text
//! u32 BE length of what follows
//! header (16 bytes):
//!   0     version (1)
//!   1     mode (0 plaintext, 1 symmetric, 2 handshake)
//!   2     kind (1 data, 2 ack, 3 hello, 4 hello-reply, 5 refuse)
//!   3     reserved, zero
//!   4..8  sequence, u32 BE
//!   8..16 sent-at, microseconds since the Unix epoch, u64 BE
//! body
//! ```
//!
//! Data bodies carry one comma-separated feature record
//! (`camera_id,frame,timestamp,people_count,n[,track_id,dwell,speed_changes,direction_changes]*`).
//! In the encrypted modes the body is AES-256-GCM ciphertext with the header
//! as associated data; the nonce is `kind || sequence || sent_at[1..8]`.
//! Acks are cumulative and carry the highest accepted sequence.

mod bench;
mod edge;
mod fog;
mod latency;
mod session;
mod wire;

pub use bench::{loopback_stream, synthetic_records, LoopbackRun};
pub use edge::{EdgeSender, EdgeStats};
pub use fog::{Delivered, FogServer, Handler, StreamStats};
pub use latency::{latency_csv, percentile, LatencyLog, LatencySample, LatencyStats};
pub use session::{Session, SessionSetup};
pub use wire::{
    decode_record, encode_record, now_micros, read_frame, write_frame, FrameKind, Header,
    HEADER_LEN, MAX_PAYLOAD, VERSION,
};

use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("payload of {size} bytes exceeds the {limit} byte limit")]
    PayloadTooLarge { size: usize, limit: usize },
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("unsupported protocol version {0}")]
    Version(u8),
    #[error("mode mismatch: expected {expected}, got {got}")]
    ModeMismatch { expected: Mode, got: Mode },
    #[error("frame failed authentication")]
    Authentication,
    #[error("connection refused by peer: {0}")]
    Refused(String),
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error("invalid transport configuration: {0}")]
    Config(String),
    #[error("connection closed: {0}")]
    Closed(String),
    #[error("timed out: {0}")]
    Timeout(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Plaintext,
    /// Pre-shared AES-256-GCM key.
    Symmetric,
    /// Ephemeral X25519 exchange at session start, then AES-256-GCM.
    Handshake,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Plaintext, Mode::Symmetric, Mode::Handshake];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Plaintext => "plaintext",
            Mode::Symmetric => "symmetric",
            Mode::Handshake => "handshake",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Mode::Plaintext => 0,
            Mode::Symmetric => 1,
            Mode::Handshake => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.code() == code)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = TransportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| TransportError::Config(format!("unknown mode `{s}`")))
    }
}

fn default_window() -> usize {
    64
}
fn default_buffer_seconds() -> f64 {
    10.0
}
fn default_queue_capacity() -> usize {
    256
}
fn default_reconnect_interval_ms() -> u64 {
    500
}

/// Mode, key material and flow-control settings shared by both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportConfig {
    pub mode: Mode,
    /// 32-byte AES key, hex encoded. Required in symmetric mode.
    #[serde(default)]
    pub psk_hex: Option<String>,
    /// Static credential both ends prove knowledge of in handshake mode.
    #[serde(default)]
    pub credential: Option<String>,
    /// Unacknowledged data frames allowed in flight before the sender blocks.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Record-time span the edge keeps while disconnected.
    #[serde(default = "default_buffer_seconds")]
    pub buffer_seconds: f64,
    /// Per-connection decoded-record queue on the fog side.
    #[serde(default = "default_queue_capacity")]
    pub queue_capacity: usize,
    #[serde(default = "default_reconnect_interval_ms")]
    pub reconnect_interval_ms: u64,
}

impl TransportConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            psk_hex: None,
            credential: None,
            window: default_window(),
            buffer_seconds: default_buffer_seconds(),
            queue_capacity: default_queue_capacity(),
            reconnect_interval_ms: default_reconnect_interval_ms(),
        }
    }

    pub fn plaintext() -> Self {
        Self::new(Mode::Plaintext)
    }

    pub fn symmetric(key: [u8; 32]) -> Self {
        Self {
            psk_hex: Some(hex::encode(key)),
            ..Self::new(Mode::Symmetric)
        }
    }

    pub fn handshake(credential: impl Into<String>) -> Self {
        Self {
            credential: Some(credential.into()),
            ..Self::new(Mode::Handshake)
        }
    }

    /// Fixed demo key material for every mode; fine for loopback benchmarks only.
    pub fn demo(mode: Mode) -> Self {
        match mode {
            Mode::Plaintext => Self::plaintext(),
            Mode::Symmetric => Self::symmetric([0x42; 32]),
            Mode::Handshake => Self::handshake("isafe-demo-credential"),
        }
    }

    pub fn validate(&self) -> Result<(), TransportError> {
        if self.window == 0 {
            return Err(TransportError::Config("window must be at least 1".into()));
        }
        if self.queue_capacity == 0 {
            return Err(TransportError::Config(
                "queue_capacity must be at least 1".into(),
            ));
        }
        if !(self.buffer_seconds.is_finite() && self.buffer_seconds >= 0.0) {
            return Err(TransportError::Config(
                "buffer_seconds must be finite and non-negative".into(),
            ));
        }
        match self.mode {
            Mode::Plaintext => {}
            Mode::Symmetric => {
                self.psk()?;
            }
            Mode::Handshake => {
                if self.credential.as_deref().is_none_or(str::is_empty) {
                    return Err(TransportError::Config(
                        "handshake mode needs a credential".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn psk(&self) -> Result<[u8; 32], TransportError> {
        let text = self
            .psk_hex
            .as_deref()
            .ok_or_else(|| TransportError::Config("symmetric mode needs psk_hex".into()))?;
        let bytes = hex::decode(text.trim())
            .map_err(|e| TransportError::Config(format!("psk_hex: {e}")))?;
        bytes.try_into().map_err(|b: Vec<u8>| {
            TransportError::Config(format!("psk must be 32 bytes, got {}", b.len()))
        })
    }

    pub fn from_json(text: &str) -> Result<Self, TransportError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| TransportError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TransportError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| TransportError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transport config serializes")
    }
}
