//! Length-prefixed binary framing with a payload checksum.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "HETS" (4) | version u16 | kind u8 | length u64 | payload | crc32(payload) u32
//! ```
//!
//! Unknown versions and kinds are rejected before any payload parsing;
//! a corrupted payload fails the checksum, never a partial parse.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"HETS";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 8;

/// Payload discriminator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FrameKind {
    PublicContext = 1,
    Ciphertext = 2,
    EncryptedVector = 3,
    InferRequest = 4,
    InferResponse = 5,
    Error = 6,
}

impl FrameKind {
    fn from_u8(v: u8) -> Result<FrameKind> {
        Ok(match v {
            1 => FrameKind::PublicContext,
            2 => FrameKind::Ciphertext,
            3 => FrameKind::EncryptedVector,
            4 => FrameKind::InferRequest,
            5 => FrameKind::InferResponse,
            6 => FrameKind::Error,
            other => return Err(Error::ParseError(format!("unknown frame kind {other}"))),
        })
    }
}

pub fn encode_frame(kind: FrameKind, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind as u8);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
    out
}

/// Decode a frame from a complete buffer.
pub fn decode_frame(bytes: &[u8]) -> Result<(FrameKind, Vec<u8>)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated(format!(
            "frame header needs {HEADER_LEN} bytes, got {}",
            bytes.len()
        )));
    }
    let mut magic = [0u8; 4];
    magic.copy_from_slice(&bytes[..4]);
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let kind = FrameKind::from_u8(bytes[6])?;
    let length = u64::from_le_bytes(bytes[7..15].try_into().unwrap()) as usize;
    if bytes.len() < HEADER_LEN + length + 4 {
        return Err(Error::Truncated(format!(
            "payload of {length} bytes truncated at {}",
            bytes.len() - HEADER_LEN
        )));
    }
    let payload = &bytes[HEADER_LEN..HEADER_LEN + length];
    let stored = u32::from_le_bytes(
        bytes[HEADER_LEN + length..HEADER_LEN + length + 4]
            .try_into()
            .unwrap(),
    );
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::BadChecksum { stored, computed });
    }
    Ok((kind, payload.to_vec()))
}

pub fn write_frame(w: &mut impl Write, kind: FrameKind, payload: &[u8]) -> Result<usize> {
    let frame = encode_frame(kind, payload);
    w.write_all(&frame)
        .map_err(|e| Error::Transport(format!("write: {e}")))?;
    Ok(frame.len())
}

/// Read one frame from a stream; returns kind, payload and total bytes read.
pub fn read_frame(r: &mut impl Read) -> Result<(FrameKind, Vec<u8>, usize)> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|e| Error::Transport(format!("read header: {e}")))?;
    if header[..4] != MAGIC {
        return Err(Error::BadMagic(header[..4].try_into().unwrap()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let kind = FrameKind::from_u8(header[6])?;
    let length = u64::from_le_bytes(header[7..15].try_into().unwrap()) as usize;
    if length > (1 << 32) {
        return Err(Error::ParseError(format!("frame length {length} implausible")));
    }
    let mut payload = vec![0u8; length];
    r.read_exact(&mut payload)
        .map_err(|e| Error::Truncated(format!("payload: {e}")))?;
    let mut crc = [0u8; 4];
    r.read_exact(&mut crc)
        .map_err(|e| Error::Truncated(format!("checksum: {e}")))?;
    let stored = u32::from_le_bytes(crc);
    let computed = crc32fast::hash(&payload);
    if stored != computed {
        return Err(Error::BadChecksum { stored, computed });
    }
    Ok((kind, payload, HEADER_LEN + length + 4))
}
