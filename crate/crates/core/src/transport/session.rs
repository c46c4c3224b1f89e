use std::net::TcpStream;
use std::time::{Duration, Instant};

use aes_gcm::aead::{Aead, Payload};
use aes_gcm::{Aes256Gcm, KeyInit, Nonce};
use sha2::{Digest, Sha256};
use x25519_dalek::{EphemeralSecret, PublicKey};

use super::wire::{read_frame, write_frame, FrameKind, Header};
use super::{Mode, TransportConfig, TransportError};

/// What it cost to bring the session up.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SessionSetup {
    /// Request/response exchanges before the first data frame.
    pub round_trips: u32,
    pub elapsed: Duration,
}

/// Per-connection frame protection.
#[derive(Clone)]
pub struct Session {
    mode: Mode,
    cipher: Option<Aes256Gcm>,
    pub setup: SessionSetup,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("mode", &self.mode)
            .field("setup", &self.setup)
            .finish()
    }
}

fn nonce(header: &Header) -> [u8; 12] {
    let mut n = [0u8; 12];
    n[0] = header.kind as u8;
    n[1..5].copy_from_slice(&header.sequence.to_be_bytes());
    n[5..12].copy_from_slice(&header.sent_at_us.to_be_bytes()[1..]);
    n
}

fn hello_proof(credential: &[u8], client_pub: &[u8; 32]) -> [u8; 32] {
    Sha256::new()
        .chain_update(b"isafe-hello")
        .chain_update(credential)
        .chain_update(client_pub)
        .finalize()
        .into()
}

fn reply_proof(credential: &[u8], client_pub: &[u8; 32], server_pub: &[u8; 32]) -> [u8; 32] {
    Sha256::new()
        .chain_update(b"isafe-reply")
        .chain_update(credential)
        .chain_update(client_pub)
        .chain_update(server_pub)
        .finalize()
        .into()
}

fn derive_key(
    shared: &[u8; 32],
    client_pub: &[u8; 32],
    server_pub: &[u8; 32],
    credential: &[u8],
) -> [u8; 32] {
    Sha256::new()
        .chain_update(shared)
        .chain_update(client_pub)
        .chain_update(server_pub)
        .chain_update(credential)
        .finalize()
        .into()
}

fn split_keys(body: &[u8]) -> Result<([u8; 32], [u8; 32]), TransportError> {
    if body.len() != 64 {
        return Err(TransportError::Handshake(format!(
            "expected 64-byte key message, got {}",
            body.len()
        )));
    }
    Ok((
        body[..32].try_into().unwrap(),
        body[32..].try_into().unwrap(),
    ))
}

/// Tells the peer why the connection is being dropped. Best effort.
pub(crate) fn refuse(stream: &mut TcpStream, mode: Mode, reason: &str) {
    let _ = write_frame(
        stream,
        &Header::new(mode, FrameKind::Refuse, 0),
        reason.as_bytes(),
    );
}

impl Session {
    pub fn plaintext() -> Self {
        Self {
            mode: Mode::Plaintext,
            cipher: None,
            setup: SessionSetup::default(),
        }
    }

    pub fn with_key(mode: Mode, key: &[u8; 32]) -> Self {
        let cipher = Aes256Gcm::new_from_slice(key).expect("32-byte key");
        Self {
            mode,
            cipher: Some(cipher),
            setup: SessionSetup::default(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Protects a frame body; the header is authenticated but sent in the clear.
    pub fn seal(&self, header: &Header, body: &[u8]) -> Result<Vec<u8>, TransportError> {
        match &self.cipher {
            None => Ok(body.to_vec()),
            Some(c) => c
                .encrypt(
                    Nonce::from_slice(&nonce(header)),
                    Payload {
                        msg: body,
                        aad: &header.to_bytes(),
                    },
                )
                .map_err(|_| TransportError::Authentication),
        }
    }

    pub fn open(&self, header: &Header, body: &[u8]) -> Result<Vec<u8>, TransportError> {
        if header.mode != self.mode {
            return Err(TransportError::ModeMismatch {
                expected: self.mode,
                got: header.mode,
            });
        }
        match &self.cipher {
            None => Ok(body.to_vec()),
            Some(c) => c
                .decrypt(
                    Nonce::from_slice(&nonce(header)),
                    Payload {
                        msg: body,
                        aad: &header.to_bytes(),
                    },
                )
                .map_err(|_| TransportError::Authentication),
        }
    }

    /// Edge side of session establishment.
    pub fn client(
        stream: &mut TcpStream,
        config: &TransportConfig,
    ) -> Result<Self, TransportError> {
        config.validate()?;
        let start = Instant::now();
        let mut session = match config.mode {
            Mode::Plaintext => Self::plaintext(),
            Mode::Symmetric => Self::with_key(Mode::Symmetric, &config.psk()?),
            Mode::Handshake => {
                let credential = config.credential.as_deref().unwrap_or_default().as_bytes();
                let secret = EphemeralSecret::random();
                let cpub = PublicKey::from(&secret).to_bytes();
                let mut hello = cpub.to_vec();
                hello.extend_from_slice(&hello_proof(credential, &cpub));
                write_frame(
                    stream,
                    &Header::new(Mode::Handshake, FrameKind::Hello, 0),
                    &hello,
                )?;

                let (header, body) = read_frame(stream)?.ok_or_else(|| {
                    TransportError::Handshake("peer closed during handshake".into())
                })?;
                match header.kind {
                    FrameKind::HelloReply => {}
                    FrameKind::Refuse => {
                        return Err(TransportError::Refused(
                            String::from_utf8_lossy(&body).into(),
                        ))
                    }
                    other => {
                        return Err(TransportError::Handshake(format!(
                            "unexpected {other:?} frame"
                        )))
                    }
                }
                let (spub, confirm) = split_keys(&body)?;
                if confirm != reply_proof(credential, &cpub, &spub) {
                    return Err(TransportError::Handshake(
                        "server failed to prove the shared credential".into(),
                    ));
                }
                let shared = secret.diffie_hellman(&PublicKey::from(spub));
                let mut s = Self::with_key(
                    Mode::Handshake,
                    &derive_key(shared.as_bytes(), &cpub, &spub, credential),
                );
                s.setup.round_trips = 1;
                s
            }
        };
        session.setup.elapsed = start.elapsed();
        Ok(session)
    }

    /// Fog side of session establishment. Refuses the peer before returning an error.
    pub fn server(
        stream: &mut TcpStream,
        config: &TransportConfig,
    ) -> Result<Self, TransportError> {
        config.validate()?;
        let start = Instant::now();
        let mut session = match config.mode {
            Mode::Plaintext => Self::plaintext(),
            Mode::Symmetric => Self::with_key(Mode::Symmetric, &config.psk()?),
            Mode::Handshake => {
                let credential = config.credential.as_deref().unwrap_or_default().as_bytes();
                let (header, body) = read_frame(stream)?
                    .ok_or_else(|| TransportError::Handshake("peer closed before hello".into()))?;
                if header.kind != FrameKind::Hello || header.mode != Mode::Handshake {
                    let reason = format!(
                        "expected handshake hello, got {:?} in {} mode",
                        header.kind, header.mode
                    );
                    refuse(stream, Mode::Handshake, &reason);
                    return Err(TransportError::Handshake(reason));
                }
                let (cpub, proof) = split_keys(&body)?;
                if proof != hello_proof(credential, &cpub) {
                    let reason = "credential mismatch";
                    refuse(stream, Mode::Handshake, reason);
                    return Err(TransportError::Refused(reason.into()));
                }
                let secret = EphemeralSecret::random();
                let spub = PublicKey::from(&secret).to_bytes();
                let mut reply = spub.to_vec();
                reply.extend_from_slice(&reply_proof(credential, &cpub, &spub));
                write_frame(
                    stream,
                    &Header::new(Mode::Handshake, FrameKind::HelloReply, 0),
                    &reply,
                )?;
                let shared = secret.diffie_hellman(&PublicKey::from(cpub));
                let mut s = Self::with_key(
                    Mode::Handshake,
                    &derive_key(shared.as_bytes(), &cpub, &spub, credential),
                );
                s.setup.round_trips = 1;
                s
            }
        };
        session.setup.elapsed = start.elapsed();
        Ok(session)
    }
}
