//! Wire format shared by both protocols. All integers are big-endian.
//!
//! ```text
//! naive:    version(1)=01 | protocol(1)=00 | segment(1) | payload_len(2) | body
//! hardened: version(1)=01 | protocol(1)=01 | segment(1) | seq(4) | nonce(12)
//!           | payload_len(2) | body | tag(16)
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cipher::{NONCE_LEN, TAG_LEN};
use crate::model::SegmentId;

pub const FRAME_VERSION: u8 = 0x01;
pub const NAIVE_HEADER_LEN: usize = 5;
pub const HARDENED_OVERHEAD: usize = NAIVE_HEADER_LEN + 4 + NONCE_LEN + TAG_LEN;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("frame truncated: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("unsupported frame version {0:#04x}")]
    UnsupportedVersion(u8),
    #[error("unknown protocol code {0:#04x}")]
    UnknownProtocol(u8),
    #[error("unknown segment code {0:#04x}")]
    UnknownSegment(u8),
    #[error("{0} trailing bytes after frame")]
    TrailingBytes(usize),
    #[error("body of {0} bytes exceeds the 16-bit length field")]
    BodyTooLong(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProtocolKind {
    Naive,
    Hardened,
}

impl ProtocolKind {
    pub fn code(self) -> u8 {
        match self {
            Self::Naive => 0x00,
            Self::Hardened => 0x01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Frame {
    Naive {
        segment: SegmentId,
        body: Vec<u8>,
    },
    Hardened {
        segment: SegmentId,
        seq: u32,
        nonce: [u8; NONCE_LEN],
        body: Vec<u8>,
        tag: [u8; TAG_LEN],
    },
}

impl Frame {
    pub fn protocol(&self) -> ProtocolKind {
        match self {
            Self::Naive { .. } => ProtocolKind::Naive,
            Self::Hardened { .. } => ProtocolKind::Hardened,
        }
    }

    pub fn segment(&self) -> SegmentId {
        match self {
            Self::Naive { segment, .. } | Self::Hardened { segment, .. } => *segment,
        }
    }

    pub fn body(&self) -> &[u8] {
        match self {
            Self::Naive { body, .. } | Self::Hardened { body, .. } => body,
        }
    }

    pub fn seq(&self) -> Option<u32> {
        match self {
            Self::Hardened { seq, .. } => Some(*seq),
            Self::Naive { .. } => None,
        }
    }

    pub fn encoded_len(&self) -> usize {
        match self {
            Self::Naive { body, .. } => NAIVE_HEADER_LEN + body.len(),
            Self::Hardened { body, .. } => HARDENED_OVERHEAD + body.len(),
        }
    }

    /// Header bytes bound into the hardened protocol's associated data:
    /// version, protocol, segment and sequence number.
    pub fn associated_data(segment: SegmentId, seq: u32) -> [u8; 7] {
        let s = seq.to_be_bytes();
        [FRAME_VERSION, ProtocolKind::Hardened.code(), segment.code(), s[0], s[1], s[2], s[3]]
    }

    pub fn encode(&self) -> Result<Vec<u8>, FrameError> {
        let body = self.body();
        let len = u16::try_from(body.len()).map_err(|_| FrameError::BodyTooLong(body.len()))?;
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&[FRAME_VERSION, self.protocol().code(), self.segment().code()]);
        if let Self::Hardened { seq, nonce, .. } = self {
            out.extend_from_slice(&seq.to_be_bytes());
            out.extend_from_slice(nonce);
        }
        out.extend_from_slice(&len.to_be_bytes());
        out.extend_from_slice(body);
        if let Self::Hardened { tag, .. } = self {
            out.extend_from_slice(tag);
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FrameError> {
        let mut r = Reader { bytes, pos: 0 };
        let [version, protocol, segment] = r.take::<3>()?;
        if version != FRAME_VERSION {
            return Err(FrameError::UnsupportedVersion(version));
        }
        let segment = SegmentId::from_code(segment).ok_or(FrameError::UnknownSegment(segment))?;
        let frame = match protocol {
            0x00 => {
                let len = u16::from_be_bytes(r.take()?) as usize;
                Self::Naive { segment, body: r.slice(len)?.to_vec() }
            }
            0x01 => {
                let seq = u32::from_be_bytes(r.take()?);
                let nonce = r.take()?;
                let len = u16::from_be_bytes(r.take()?) as usize;
                let body = r.slice(len)?.to_vec();
                let tag = r.take()?;
                Self::Hardened { segment, seq, nonce, body, tag }
            }
            other => return Err(FrameError::UnknownProtocol(other)),
        };
        match bytes.len() - r.pos {
            0 => Ok(frame),
            extra => Err(FrameError::TrailingBytes(extra)),
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn slice(&mut self, n: usize) -> Result<&'a [u8], FrameError> {
        let end = self.pos + n;
        let out = self.bytes.get(self.pos..end).ok_or(FrameError::Truncated {
            needed: end,
            have: self.bytes.len(),
        })?;
        self.pos = end;
        Ok(out)
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], FrameError> {
        Ok(self.slice(N)?.try_into().expect("slice of length N"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lengths_and_layout() {
        let naive = Frame::Naive { segment: SegmentId::S3, body: vec![0xaa; 7] };
        let bytes = naive.encode().unwrap();
        assert_eq!(bytes.len(), 5 + 7);
        assert_eq!(&bytes[..5], &[0x01, 0x00, 0x03, 0x00, 0x07]);

        let hard = Frame::Hardened {
            segment: SegmentId::S1,
            seq: 0x01020304,
            nonce: [0x11; 12],
            body: vec![0xbb; 16],
            tag: [0xcc; 16],
        };
        let bytes = hard.encode().unwrap();
        assert_eq!(bytes.len(), 5 + 4 + 12 + 16 + 16);
        assert_eq!(&bytes[..7], &[0x01, 0x01, 0x01, 0x01, 0x02, 0x03, 0x04]);
        assert_eq!(&bytes[19..21], &[0x00, 0x10]);
        assert_eq!(Frame::decode(&bytes).unwrap(), hard);
    }

    #[test]
    fn decode_errors() {
        assert_eq!(Frame::decode(&[0x01]), Err(FrameError::Truncated { needed: 3, have: 1 }));
        assert_eq!(Frame::decode(&[0x02, 0, 1, 0, 0]), Err(FrameError::UnsupportedVersion(2)));
        assert_eq!(Frame::decode(&[0x01, 7, 1, 0, 0]), Err(FrameError::UnknownProtocol(7)));
        assert_eq!(Frame::decode(&[0x01, 0, 9, 0, 0]), Err(FrameError::UnknownSegment(9)));
        assert_eq!(Frame::decode(&[0x01, 0, 1, 0, 2, 5]), Err(FrameError::Truncated { needed: 7, have: 6 }));
        assert_eq!(Frame::decode(&[0x01, 0, 1, 0, 0, 5]), Err(FrameError::TrailingBytes(1)));
    }

    #[test]
    fn oversized_body_rejected() {
        let f = Frame::Naive { segment: SegmentId::S1, body: vec![0; 70_000] };
        assert_eq!(f.encode(), Err(FrameError::BodyTooLong(70_000)));
    }

    fn arb_frame() -> impl Strategy<Value = Frame> {
        let seg = prop::sample::select(SegmentId::ALL.to_vec());
        let body = prop::collection::vec(any::<u8>(), 0..300);
        prop_oneof![
            (seg.clone(), body.clone()).prop_map(|(segment, body)| Frame::Naive { segment, body }),
            (seg, any::<u32>(), any::<[u8; 12]>(), body, any::<[u8; 16]>()).prop_map(
                |(segment, seq, nonce, body, tag)| Frame::Hardened { segment, seq, nonce, body, tag }
            ),
        ]
    }

    proptest! {
        #[test]
        fn codec_round_trip(f in arb_frame()) {
            let bytes = f.encode().unwrap();
            prop_assert_eq!(bytes.len(), f.encoded_len());
            prop_assert_eq!(Frame::decode(&bytes).unwrap(), f);
        }

        #[test]
        fn decode_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..80)) {
            let _ = Frame::decode(&bytes);
        }
    }
}
