//! Length-prefixed frames exchanged between workers and the aggregator.
//!
//! ```text
//! magic u16 = 0xA66A | version u8 | type u8 | round_id u64 | worker_id u16
//!     | payload_len u32 | payload
//! ```
//!
//! All integers little-endian. SUBMIT and RESULT carry a serialized
//! compressed gradient; NACK carries a single reason byte.

use std::io::{ErrorKind, Read, Write};

use crate::error::{Error, Result};

pub const FRAME_MAGIC: u16 = 0xA66A;
pub const FRAME_VERSION: u8 = 0x01;
pub const FRAME_HEADER_LEN: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameType {
    Submit = 0x01,
    Result = 0x02,
    Nack = 0x03,
}

impl FrameType {
    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0x01 => Ok(FrameType::Submit),
            0x02 => Ok(FrameType::Result),
            0x03 => Ok(FrameType::Nack),
            other => Err(Error::Format(format!("unknown frame type {other:#04x}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum NackReason {
    SizeMismatch = 0x01,
    HeaderMismatch = 0x02,
    Duplicate = 0x03,
}

impl NackReason {
    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0x01 => Ok(NackReason::SizeMismatch),
            0x02 => Ok(NackReason::HeaderMismatch),
            0x03 => Ok(NackReason::Duplicate),
            other => Err(Error::Format(format!("unknown nack reason {other:#04x}"))),
        }
    }
}

impl std::fmt::Display for NackReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            NackReason::SizeMismatch => "size mismatch",
            NackReason::HeaderMismatch => "header mismatch",
            NackReason::Duplicate => "duplicate submission",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameType,
    pub round_id: u64,
    pub worker_id: u16,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn submit(round_id: u64, worker_id: u16, payload: Vec<u8>) -> Self {
        Self { kind: FrameType::Submit, round_id, worker_id, payload }
    }

    pub fn result(round_id: u64, worker_id: u16, payload: Vec<u8>) -> Self {
        Self { kind: FrameType::Result, round_id, worker_id, payload }
    }

    pub fn nack(round_id: u64, worker_id: u16, reason: NackReason) -> Self {
        Self { kind: FrameType::Nack, round_id, worker_id, payload: vec![reason as u8] }
    }

    pub fn nack_reason(&self) -> Result<NackReason> {
        match (self.kind, self.payload.as_slice()) {
            (FrameType::Nack, [code]) => NackReason::from_code(*code),
            _ => Err(Error::Format("not a well-formed NACK frame".into())),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FRAME_HEADER_LEN + self.payload.len());
        out.extend_from_slice(&FRAME_MAGIC.to_le_bytes());
        out.push(FRAME_VERSION);
        out.push(self.kind as u8);
        out.extend_from_slice(&self.round_id.to_le_bytes());
        out.extend_from_slice(&self.worker_id.to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        if self.payload.len() > u32::MAX as usize {
            return Err(Error::Format("payload exceeds u32 length".into()));
        }
        w.write_all(&self.to_bytes())?;
        w.flush()?;
        Ok(())
    }

    /// Reads one frame. Returns `Ok(None)` on a clean end of stream before
    /// any header byte.
    pub fn read_from<R: Read>(mut r: R, max_payload: u32) -> Result<Option<Frame>> {
        let mut head = [0u8; FRAME_HEADER_LEN];
        let mut filled = 0;
        while filled < FRAME_HEADER_LEN {
            match r.read(&mut head[filled..]) {
                Ok(0) if filled == 0 => return Ok(None),
                Ok(0) => return Err(Error::Format("stream ended inside a frame header".into())),
                Ok(k) => filled += k,
                Err(e) if e.kind() == ErrorKind::Interrupted => continue,
                Err(e) => return Err(e.into()),
            }
        }
        let magic = u16::from_le_bytes([head[0], head[1]]);
        if magic != FRAME_MAGIC {
            return Err(Error::Format(format!("bad frame magic {magic:#06x}")));
        }
        if head[2] != FRAME_VERSION {
            return Err(Error::Format(format!("unsupported frame version {}", head[2])));
        }
        let kind = FrameType::from_code(head[3])?;
        let round_id = u64::from_le_bytes(head[4..12].try_into().unwrap());
        let worker_id = u16::from_le_bytes([head[12], head[13]]);
        let len = u32::from_le_bytes(head[14..18].try_into().unwrap());
        if len > max_payload {
            return Err(Error::Format(format!("payload of {len} bytes exceeds limit {max_payload}")));
        }
        let mut payload = vec![0u8; len as usize];
        r.read_exact(&mut payload).map_err(|e| {
            if e.kind() == ErrorKind::UnexpectedEof {
                Error::Format("stream ended inside a frame payload".into())
            } else {
                Error::Io(e)
            }
        })?;
        Ok(Some(Frame { kind, round_id, worker_id, payload }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_bit_exact() {
        let f = Frame::submit(0x1122_3344_5566_7788, 0xABCD, vec![9, 8, 7]);
        let b = f.to_bytes();
        assert_eq!(&b[..2], &[0x6A, 0xA6]);
        assert_eq!(b[2], 0x01);
        assert_eq!(b[3], 0x01);
        assert_eq!(&b[4..12], &0x1122_3344_5566_7788u64.to_le_bytes());
        assert_eq!(&b[12..14], &[0xCD, 0xAB]);
        assert_eq!(&b[14..18], &3u32.to_le_bytes());
        assert_eq!(&b[18..], &[9, 8, 7]);
        assert_eq!(Frame::read_from(&b[..], 1024).unwrap(), Some(f));
    }

    #[test]
    fn nack_codes() {
        let f = Frame::nack(1, 2, NackReason::HeaderMismatch);
        assert_eq!(f.payload, vec![0x02]);
        let back = Frame::read_from(&f.to_bytes()[..], 16).unwrap().unwrap();
        assert_eq!(back.nack_reason().unwrap(), NackReason::HeaderMismatch);
        assert_eq!(Frame::nack(0, 0, NackReason::Duplicate).payload, vec![0x03]);
        assert_eq!(Frame::nack(0, 0, NackReason::SizeMismatch).payload, vec![0x01]);
    }

    #[test]
    fn clean_eof_and_truncation() {
        assert_eq!(Frame::read_from(&[][..], 16).unwrap(), None);
        let b = Frame::result(1, 1, vec![1, 2, 3, 4]).to_bytes();
        assert!(Frame::read_from(&b[..10], 16).is_err());
        assert!(Frame::read_from(&b[..b.len() - 1], 16).is_err());
        assert!(Frame::read_from(&b[..], 3).is_err());
        let mut bad = b.clone();
        bad[3] = 0x07;
        assert!(Frame::read_from(&bad[..], 16).is_err());
        bad = b;
        bad[0] = 0;
        assert!(Frame::read_from(&bad[..], 16).is_err());
    }
}
