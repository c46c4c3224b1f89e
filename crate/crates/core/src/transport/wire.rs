use std::fmt::Write as _;
use std::io::{self, Read, Write};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use super::{Mode, TransportError};
use crate::track::{FeatureRecord, ObjectFeatures};

pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;
/// Largest encoded record body.
pub const MAX_PAYLOAD: usize = 1 << 20;
const TAG_LEN: usize = 16;
const MAX_FRAME: usize = HEADER_LEN + MAX_PAYLOAD + TAG_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    Data = 1,
    Ack = 2,
    Hello = 3,
    HelloReply = 4,
    Refuse = 5,
}

impl FrameKind {
    fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            1 => Self::Data,
            2 => Self::Ack,
            3 => Self::Hello,
            4 => Self::HelloReply,
            5 => Self::Refuse,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub mode: Mode,
    pub kind: FrameKind,
    pub sequence: u32,
    pub sent_at_us: u64,
}

impl Header {
    pub fn new(mode: Mode, kind: FrameKind, sequence: u32) -> Self {
        Self {
            mode,
            kind,
            sequence,
            sent_at_us: now_micros(),
        }
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0] = VERSION;
        b[1] = self.mode.code();
        b[2] = self.kind as u8;
        b[4..8].copy_from_slice(&self.sequence.to_be_bytes());
        b[8..16].copy_from_slice(&self.sent_at_us.to_be_bytes());
        b
    }

    pub fn parse(b: &[u8]) -> Result<Self, TransportError> {
        if b.len() < HEADER_LEN {
            return Err(TransportError::Malformed(format!(
                "header needs {HEADER_LEN} bytes, got {}",
                b.len()
            )));
        }
        if b[0] != VERSION {
            return Err(TransportError::Version(b[0]));
        }
        let mode = Mode::from_code(b[1])
            .ok_or_else(|| TransportError::Malformed(format!("unknown mode {}", b[1])))?;
        let kind = FrameKind::from_code(b[2])
            .ok_or_else(|| TransportError::Malformed(format!("unknown kind {}", b[2])))?;
        if b[3] != 0 {
            return Err(TransportError::Malformed("reserved byte set".into()));
        }
        Ok(Self {
            mode,
            kind,
            sequence: u32::from_be_bytes(b[4..8].try_into().unwrap()),
            sent_at_us: u64::from_be_bytes(b[8..16].try_into().unwrap()),
        })
    }
}

pub fn now_micros() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_micros() as u64)
        .unwrap_or(0)
}

/// Writes one length-prefixed frame and returns the number of bytes put on the wire.
pub fn write_frame(
    w: &mut impl Write,
    header: &Header,
    body: &[u8],
) -> Result<usize, TransportError> {
    let len = HEADER_LEN + body.len();
    if len > MAX_FRAME {
        return Err(TransportError::PayloadTooLarge {
            size: body.len(),
            limit: MAX_PAYLOAD,
        });
    }
    let mut buf = Vec::with_capacity(4 + len);
    buf.extend_from_slice(&(len as u32).to_be_bytes());
    buf.extend_from_slice(&header.to_bytes());
    buf.extend_from_slice(body);
    w.write_all(&buf)?;
    Ok(buf.len())
}

/// Reads one frame; `None` on a clean end of stream between frames.
pub fn read_frame(r: &mut impl Read) -> Result<Option<(Header, Vec<u8>)>, TransportError> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len) as usize;
    if !(HEADER_LEN..=MAX_FRAME).contains(&len) {
        return Err(TransportError::Malformed(format!("frame length {len}")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    let header = Header::parse(&buf[..HEADER_LEN])?;
    buf.drain(..HEADER_LEN);
    Ok(Some((header, buf)))
}

fn check_camera_id(id: &str) -> Result<(), TransportError> {
    if id.is_empty() || id.contains([',', '\n', '\r']) {
        return Err(TransportError::Malformed(format!(
            "camera id `{id}` must be non-empty without commas or newlines"
        )));
    }
    Ok(())
}

/// Serializes a feature record into the text body of a data frame.
///
/// Floats use the shortest representation that parses back to the same bits.
pub fn encode_record(camera_id: &str, record: &FeatureRecord) -> Result<Vec<u8>, TransportError> {
    check_camera_id(camera_id)?;
    let mut s = String::with_capacity(32 + 24 * record.objects.len());
    write!(
        s,
        "{camera_id},{},{:?},{},{}",
        record.frame_index,
        record.timestamp,
        record.people_count,
        record.objects.len()
    )
    .unwrap();
    for o in &record.objects {
        write!(
            s,
            ",{},{:?},{},{}",
            o.track_id, o.dwell_time, o.speed_changes, o.direction_changes
        )
        .unwrap();
        if s.len() > MAX_PAYLOAD {
            break;
        }
    }
    if s.len() > MAX_PAYLOAD {
        return Err(TransportError::PayloadTooLarge {
            size: s.len(),
            limit: MAX_PAYLOAD,
        });
    }
    Ok(s.into_bytes())
}

pub fn decode_record(body: &[u8]) -> Result<(String, FeatureRecord), TransportError> {
    let text = std::str::from_utf8(body)
        .map_err(|_| TransportError::Malformed("payload is not utf-8".into()))?;
    let mut fields = text.split(',');
    let mut next = |what: &str| {
        fields
            .next()
            .ok_or_else(|| TransportError::Malformed(format!("missing {what}")))
    };
    fn num<T: FromStr>(s: &str, what: &str) -> Result<T, TransportError> {
        s.parse()
            .map_err(|_| TransportError::Malformed(format!("bad {what} `{s}`")))
    }

    let camera_id = next("camera id")?.to_string();
    check_camera_id(&camera_id)?;
    let frame_index = num(next("frame index")?, "frame index")?;
    let timestamp = num(next("timestamp")?, "timestamp")?;
    let people_count = num(next("people count")?, "people count")?;
    let n: usize = num(next("object count")?, "object count")?;
    if n > body.len() / 8 {
        return Err(TransportError::Malformed(format!(
            "object count {n} exceeds payload"
        )));
    }
    let mut objects = Vec::with_capacity(n);
    for _ in 0..n {
        objects.push(ObjectFeatures {
            track_id: num(next("track id")?, "track id")?,
            dwell_time: num(next("dwell time")?, "dwell time")?,
            speed_changes: num(next("speed changes")?, "speed changes")?,
            direction_changes: num(next("direction changes")?, "direction changes")?,
        });
    }
    if fields.next().is_some() {
        return Err(TransportError::Malformed("trailing fields".into()));
    }
    Ok((
        camera_id,
        FeatureRecord {
            frame_index,
            timestamp,
            people_count,
            objects,
        },
    ))
}
