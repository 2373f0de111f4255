//! Frames: 4-byte big-endian body length, then a UTF-8 JSON object.

use std::io::{self, Read, Write};

use thiserror::Error;

use super::message::FedMessage;

/// Largest accepted body, bytes.
pub const MAX_FRAME: usize = 16 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CodecError {
    /// True for a clean end of stream before any byte of a frame.
    pub fn is_eof(&self) -> bool {
        matches!(self, CodecError::Io(e) if e.kind() == io::ErrorKind::UnexpectedEof)
    }
}

pub fn encode_body(msg: &FedMessage) -> Vec<u8> {
    serde_json::to_vec(msg).expect("messages always serialize")
}

pub fn encode(msg: &FedMessage) -> Vec<u8> {
    let body = encode_body(msg);
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

pub fn decode_body(body: &[u8]) -> Result<FedMessage, CodecError> {
    let text = std::str::from_utf8(body)
        .map_err(|e| CodecError::MalformedFrame(format!("invalid UTF-8: {e}")))?;
    let msg: FedMessage =
        serde_json::from_str(text).map_err(|e| CodecError::MalformedFrame(e.to_string()))?;
    if !(msg.sim_time >= 0.0 && msg.sim_time.is_finite()) {
        return Err(CodecError::MalformedFrame(format!(
            "sim_time {}",
            msg.sim_time
        )));
    }
    Ok(msg)
}

fn check_len(len: usize) -> Result<(), CodecError> {
    if len == 0 || len > MAX_FRAME {
        return Err(CodecError::MalformedFrame(format!("bad length {len}")));
    }
    Ok(())
}

/// Decodes one complete frame; trailing bytes are an error.
pub fn decode(bytes: &[u8]) -> Result<FedMessage, CodecError> {
    if bytes.len() < 4 {
        return Err(CodecError::MalformedFrame("short header".into()));
    }
    let len = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    check_len(len)?;
    if bytes.len() != 4 + len {
        return Err(CodecError::MalformedFrame(format!(
            "length {len} does not match {} body bytes",
            bytes.len() - 4
        )));
    }
    decode_body(&bytes[4..])
}

pub fn read_frame(r: &mut impl Read) -> Result<FedMessage, CodecError> {
    let mut header = [0u8; 4];
    r.read_exact(&mut header)?;
    let len = u32::from_be_bytes(header) as usize;
    check_len(len)?;
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    decode_body(&body)
}

pub fn write_frame(w: &mut impl Write, msg: &FedMessage) -> io::Result<()> {
    w.write_all(&encode(msg))?;
    w.flush()
}
