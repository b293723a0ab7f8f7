//! Command-link protocols.
//!
//! The naive protocol encrypts each command under the configured cipher and
//! ships it with no freshness information, so a receiver accepts any
//! well-formed frame, including a replayed one. The hardened protocol
//! numbers every frame, binds the number into the GCM associated data and
//! runs an anti-replay window at the receiver.

mod frame;
mod window;

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cipher::{CipherConfig, CipherMode, Ciphertext, CryptoError, Encryptor, BLOCK_LEN};
use crate::model::SegmentId;

pub use frame::{Frame, FrameError, ProtocolKind, FRAME_VERSION, HARDENED_OVERHEAD, NAIVE_HEADER_LEN};
pub use window::{ReplayWindow, WindowVerdict, WINDOW_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Command {
    Up,
    Down,
    Forward,
    Backward,
    Left,
    Right,
    Hover,
    ReturnHome,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Self::Up,
        Self::Down,
        Self::Forward,
        Self::Backward,
        Self::Left,
        Self::Right,
        Self::Hover,
        Self::ReturnHome,
    ];

    pub fn code(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get((code as usize).wrapping_sub(1)).copied()
    }

    /// The code byte zero-padded to one cipher block.
    pub fn to_block(self) -> [u8; BLOCK_LEN] {
        let mut b = [0u8; BLOCK_LEN];
        b[0] = self.code();
        b
    }

    fn from_block(plain: &[u8]) -> Result<Self, LinkError> {
        let (&code, pad) = plain.split_first().ok_or(LinkError::Decode(None))?;
        if plain.len() != BLOCK_LEN || pad.iter().any(|&b| b != 0) {
            return Err(LinkError::Decode(Some(code)));
        }
        Self::from_code(code).ok_or(LinkError::Decode(Some(code)))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl std::str::FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| format!("unknown command {s:?}"))
    }
}

/// Why a hardened receiver refused a frame. Rejections are outcomes, not faults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rejection {
    AuthFailure,
    ReplayDuplicate,
    ReplayTooOld,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Delivery {
    Accepted(Command),
    Rejected(Rejection),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinkError {
    #[error("hardened protocol requires an authenticated mode, got {0}")]
    RequiresAead(CipherMode),
    #[error("endpoint speaks {expected:?}, frame is {actual:?}")]
    WrongProtocol { expected: ProtocolKind, actual: ProtocolKind },
    #[error("endpoint is on segment {expected}, frame is for {actual}")]
    WrongSegment { expected: SegmentId, actual: SegmentId },
    #[error("sequence number space exhausted")]
    SeqExhausted,
    #[error("plaintext is not a command block (first byte {0:?})")]
    Decode(Option<u8>),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// One end of a command link; sends with `send`, receives with `receive`.
///
/// Sender and receiver sides share a type so one value models a full-duplex
/// endpoint. The send counter and the replay window are independent.
#[derive(Debug, Clone)]
pub struct LinkEndpoint {
    protocol: ProtocolKind,
    segment: SegmentId,
    encryptor: Encryptor,
    send_seq: u32,
    window: ReplayWindow,
}

impl LinkEndpoint {
    pub fn naive(segment: SegmentId, cfg: CipherConfig) -> Self {
        Self {
            protocol: ProtocolKind::Naive,
            segment,
            encryptor: Encryptor::new(cfg),
            send_seq: 0,
            window: ReplayWindow::new(),
        }
    }

    pub fn hardened(segment: SegmentId, cfg: CipherConfig) -> Result<Self, LinkError> {
        if !cfg.mode.is_authenticated() {
            return Err(LinkError::RequiresAead(cfg.mode));
        }
        Ok(Self {
            protocol: ProtocolKind::Hardened,
            ..Self::naive(segment, cfg)
        })
    }

    pub fn new(protocol: ProtocolKind, segment: SegmentId, cfg: CipherConfig) -> Result<Self, LinkError> {
        match protocol {
            ProtocolKind::Naive => Ok(Self::naive(segment, cfg)),
            ProtocolKind::Hardened => Self::hardened(segment, cfg),
        }
    }

    pub fn protocol(&self) -> ProtocolKind {
        self.protocol
    }

    pub fn segment(&self) -> SegmentId {
        self.segment
    }

    pub fn config(&self) -> &CipherConfig {
        self.encryptor.config()
    }

    /// Last sequence number sent (0 before the first send).
    pub fn send_seq(&self) -> u32 {
        self.send_seq
    }

    /// Moves the send counter, e.g. to resume a session.
    pub fn set_send_seq(&mut self, seq: u32) {
        self.send_seq = seq;
    }

    pub fn window(&self) -> &ReplayWindow {
        &self.window
    }

    pub fn send<R: RngCore + ?Sized>(&mut self, cmd: Command, rng: &mut R) -> Result<Frame, LinkError> {
        match self.protocol {
            ProtocolKind::Naive => self.naive_send(cmd, rng),
            ProtocolKind::Hardened => self.hardened_send(cmd, rng),
        }
    }

    pub fn receive(&mut self, frame: &Frame) -> Result<Delivery, LinkError> {
        match self.protocol {
            ProtocolKind::Naive => self.naive_receive(frame).map(Delivery::Accepted),
            ProtocolKind::Hardened => self.hardened_receive(frame),
        }
    }

    /// Body is `nonce || ciphertext || tag` of the padded command block, with
    /// absent parts omitted. Deterministic modes yield identical frames for
    /// identical commands.
    pub fn naive_send<R: RngCore + ?Sized>(&mut self, cmd: Command, rng: &mut R) -> Result<Frame, LinkError> {
        self.expect_protocol(ProtocolKind::Naive)?;
        let ct = self.encryptor.encrypt(&cmd.to_block(), rng)?;
        Ok(Frame::Naive { segment: self.segment, body: ct.to_wire() })
    }

    /// Accepts any frame that decrypts to a command. No freshness check.
    pub fn naive_receive(&mut self, frame: &Frame) -> Result<Command, LinkError> {
        self.expect_protocol(frame.protocol())?;
        self.expect_segment(frame.segment())?;
        let cfg = self.config();
        let ct = Ciphertext::from_wire(cfg.mode, frame.body())?;
        let plain = self.encryptor.open(&ct, &[])?;
        Command::from_block(&plain)
    }

    pub fn hardened_send<R: RngCore + ?Sized>(&mut self, cmd: Command, rng: &mut R) -> Result<Frame, LinkError> {
        self.expect_protocol(ProtocolKind::Hardened)?;
        let seq = self.send_seq.checked_add(1).ok_or(LinkError::SeqExhausted)?;
        let aad = Frame::associated_data(self.segment, seq);
        let ct = self.encryptor.seal(&cmd.to_block(), &aad, rng)?;
        let nonce = ct
            .nonce_or_iv
            .as_deref()
            .and_then(|n| n.try_into().ok())
            .expect("GCM nonce");
        self.send_seq = seq;
        Ok(Frame::Hardened {
            segment: self.segment,
            seq,
            nonce,
            body: ct.body,
            tag: ct.tag.expect("GCM tag"),
        })
    }

    /// Authenticates, then consults the window. State changes only on accept.
    pub fn hardened_receive(&mut self, frame: &Frame) -> Result<Delivery, LinkError> {
        self.expect_protocol(frame.protocol())?;
        self.expect_segment(frame.segment())?;
        let Frame::Hardened { segment, seq, nonce, body, tag } = frame else {
            unreachable!("protocol checked");
        };
        let ct = Ciphertext {
            body: body.clone(),
            nonce_or_iv: Some(nonce.to_vec()),
            tag: Some(*tag),
        };
        let plain = match self.encryptor.open(&ct, &Frame::associated_data(*segment, *seq)) {
            Ok(p) => p,
            Err(CryptoError::AuthFailure) => return Ok(Delivery::Rejected(Rejection::AuthFailure)),
            Err(e) => return Err(e.into()),
        };
        match self.window.check(*seq) {
            WindowVerdict::Duplicate => return Ok(Delivery::Rejected(Rejection::ReplayDuplicate)),
            WindowVerdict::TooOld => return Ok(Delivery::Rejected(Rejection::ReplayTooOld)),
            WindowVerdict::Accept => {}
        }
        let cmd = Command::from_block(&plain)?;
        self.window.update(*seq);
        Ok(Delivery::Accepted(cmd))
    }

    fn expect_protocol(&self, actual: ProtocolKind) -> Result<(), LinkError> {
        if actual == self.protocol {
            Ok(())
        } else {
            Err(LinkError::WrongProtocol { expected: self.protocol, actual })
        }
    }

    fn expect_segment(&self, actual: SegmentId) -> Result<(), LinkError> {
        if actual == self.segment {
            Ok(())
        } else {
            Err(LinkError::WrongSegment { expected: self.segment, actual })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::{Key128, NoncePolicy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const KEY: Key128 = Key128([0x5c; 16]);

    fn pair(protocol: ProtocolKind, mode: CipherMode) -> (LinkEndpoint, LinkEndpoint) {
        let cfg = CipherConfig::new(mode, KEY);
        (
            LinkEndpoint::new(protocol, SegmentId::S3, cfg).unwrap(),
            LinkEndpoint::new(protocol, SegmentId::S3, cfg).unwrap(),
        )
    }

    #[test]
    fn command_codes() {
        let codes: Vec<u8> = Command::ALL.iter().map(|c| c.code()).collect();
        assert_eq!(codes, (1..=8).collect::<Vec<_>>());
        assert_eq!(Command::from_code(0), None);
        assert_eq!(Command::from_code(9), None);
        assert_eq!(Command::from_code(0x08), Some(Command::ReturnHome));
    }

    #[test]
    fn naive_ecb_frames_repeat() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mut tx, mut rx) = pair(ProtocolKind::Naive, CipherMode::Ecb);
        let a = tx.send(Command::Up, &mut rng).unwrap();
        let b = tx.send(Command::Up, &mut rng).unwrap();
        assert_eq!(a.encode().unwrap(), b.encode().unwrap());
        assert_eq!(rx.receive(&a).unwrap(), Delivery::Accepted(Command::Up));
        assert_eq!(rx.receive(&a).unwrap(), Delivery::Accepted(Command::Up));
    }

    #[test]
    fn naive_plaintext_body() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (mut tx, _) = pair(ProtocolKind::Naive, CipherMode::None);
        let f = tx.send(Command::Up, &mut rng).unwrap();
        assert_eq!(f.body(), &Command::Up.to_block());
        assert_eq!(f.body()[0], 0x01);
    }

    #[test]
    fn naive_gcm_frames_differ() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut tx, mut rx) = pair(ProtocolKind::Naive, CipherMode::Gcm);
        let frames: std::collections::HashSet<_> =
            (0..100).map(|_| tx.send(Command::Hover, &mut rng).unwrap().encode().unwrap()).collect();
        assert_eq!(frames.len(), 100);
        let f = tx.send(Command::Hover, &mut rng).unwrap();
        assert_eq!(rx.receive(&f).unwrap(), Delivery::Accepted(Command::Hover));
    }

    #[test]
    fn naive_unknown_code() {
        let (_, mut rx) = pair(ProtocolKind::Naive, CipherMode::None);
        let mut block = [0u8; 16];
        block[0] = 0xff;
        let f = Frame::Naive { segment: SegmentId::S3, body: block.to_vec() };
        assert_eq!(rx.receive(&f), Err(LinkError::Decode(Some(0xff))));
    }

    #[test]
    fn hardened_requires_gcm() {
        for mode in [CipherMode::None, CipherMode::Ecb, CipherMode::Cbc, CipherMode::Ctr] {
            assert_eq!(
                LinkEndpoint::hardened(SegmentId::S1, CipherConfig::new(mode, KEY)).err(),
                Some(LinkError::RequiresAead(mode))
            );
        }
    }

    #[test]
    fn hardened_sequence_and_replay() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (mut tx, mut rx) = pair(ProtocolKind::Hardened, CipherMode::Gcm);
        let frames: Vec<_> = (0..3).map(|_| tx.send(Command::Left, &mut rng).unwrap()).collect();
        assert_eq!(frames.iter().map(|f| f.seq().unwrap()).collect::<Vec<_>>(), [1, 2, 3]);
        assert_ne!(frames[0].body(), frames[1].body());
        for f in &frames {
            assert_eq!(rx.receive(f).unwrap(), Delivery::Accepted(Command::Left));
        }
        assert_eq!(rx.receive(&frames[1]).unwrap(), Delivery::Rejected(Rejection::ReplayDuplicate));
    }

    #[test]
    fn hardened_too_old() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut tx, mut rx) = pair(ProtocolKind::Hardened, CipherMode::Gcm);
        let frames: Vec<_> = (0..100).map(|_| tx.send(Command::Down, &mut rng).unwrap()).collect();
        rx.receive(&frames[99]).unwrap();
        assert_eq!(rx.window().highest(), 100);
        assert_eq!(rx.receive(&frames[29]).unwrap(), Delivery::Rejected(Rejection::ReplayTooOld));
    }

    #[test]
    fn hardened_seq_exhaustion() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (mut tx, mut rx) = pair(ProtocolKind::Hardened, CipherMode::Gcm);
        tx.set_send_seq(u32::MAX - 1);
        let last = tx.send(Command::Up, &mut rng).unwrap();
        assert_eq!(last.seq(), Some(u32::MAX));
        assert_eq!(tx.send(Command::Up, &mut rng), Err(LinkError::SeqExhausted));
        assert_eq!(rx.receive(&last).unwrap(), Delivery::Accepted(Command::Up));
    }

    #[test]
    fn hardened_tampering_rejected_without_state_change() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut tx, mut rx) = pair(ProtocolKind::Hardened, CipherMode::Gcm);
        rx.receive(&tx.send(Command::Up, &mut rng).unwrap()).unwrap();
        let good = tx.send(Command::Forward, &mut rng).unwrap();
        let before = *rx.window();

        let Frame::Hardened { segment, seq, nonce, body, tag } = good.clone() else { unreachable!() };
        let bumped = Frame::Hardened { segment, seq: seq + 5, nonce, body: body.clone(), tag };
        assert_eq!(rx.receive(&bumped).unwrap(), Delivery::Rejected(Rejection::AuthFailure));
        let mut flipped = body.clone();
        flipped[0] ^= 1;
        let flipped = Frame::Hardened { segment, seq, nonce, body: flipped, tag };
        assert_eq!(rx.receive(&flipped).unwrap(), Delivery::Rejected(Rejection::AuthFailure));
        assert_eq!(*rx.window(), before);
        assert_eq!(rx.receive(&good).unwrap(), Delivery::Accepted(Command::Forward));
    }

    #[test]
    fn hardened_counter_nonces_work() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cfg = CipherConfig::new(CipherMode::Gcm, KEY).with_nonce_policy(NoncePolicy::CounterPerMessage);
        let mut tx = LinkEndpoint::hardened(SegmentId::S2, cfg).unwrap();
        let mut rx = LinkEndpoint::hardened(SegmentId::S2, cfg).unwrap();
        for cmd in Command::ALL {
            assert_eq!(rx.receive(&tx.send(cmd, &mut rng).unwrap()).unwrap(), Delivery::Accepted(cmd));
        }
    }

    #[test]
    fn protocol_and_segment_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (mut naive, _) = pair(ProtocolKind::Naive, CipherMode::Gcm);
        let (_, mut hard) = pair(ProtocolKind::Hardened, CipherMode::Gcm);
        let f = naive.send(Command::Up, &mut rng).unwrap();
        assert!(matches!(hard.receive(&f), Err(LinkError::WrongProtocol { .. })));
        let mut other = LinkEndpoint::naive(SegmentId::S1, *naive.config());
        assert!(matches!(other.receive(&f), Err(LinkError::WrongSegment { .. })));
    }
}
