//! Passive observer and active replayer.
//!
//! The adversary sees every frame on the air and the movement the vehicle
//! makes in response. Pairing the two yields a ciphertext-to-command
//! codebook; re-sending a capture is a replay attack.

mod toy;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::link::{Command, Delivery, Frame, LinkEndpoint, Rejection};

pub use toy::{coa_candidates, is_toy_command_block, kpa_key_search, toy_command_block, ToyCipher, KEY_SPACE};

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("bytes already recorded as {known}, now observed as {observed}")]
    InconsistentObservation { known: Command, observed: Command },
    #[error("capture index {pick} out of range ({len} captures)")]
    NoSuchCapture { pick: usize, len: usize },
    #[error("capture log line {line}: {reason}")]
    CaptureLog { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A frame seen on the air together with the movement that followed it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub tick: u64,
    pub frame_bytes: Vec<u8>,
    pub movement: Command,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Codebook {
    entries: BTreeMap<Vec<u8>, Command>,
    covered: BTreeSet<Command>,
    command_set_size: usize,
}

impl Codebook {
    pub fn new(command_set_size: usize) -> Self {
        Self {
            command_set_size,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every command in the command set has at least one entry.
    pub fn complete(&self) -> bool {
        self.covered.len() >= self.command_set_size
    }

    pub fn lookup(&self, frame_bytes: &[u8]) -> Option<Command> {
        self.entries.get(frame_bytes).copied()
    }

    fn insert(&mut self, bytes: &[u8], cmd: Command) -> Result<(), AdversaryError> {
        match self.entries.get(bytes) {
            Some(&known) if known != cmd => Err(AdversaryError::InconsistentObservation { known, observed: cmd }),
            Some(_) => Ok(()),
            None => {
                self.entries.insert(bytes.to_vec(), cmd);
                self.covered.insert(cmd);
                Ok(())
            }
        }
    }
}

/// Reasons a replayed capture failed to move the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RejectReason {
    AuthFailure,
    ReplayDuplicate,
    ReplayTooOld,
    /// The receiver could not parse or decrypt the frame.
    Malformed,
}

impl From<Rejection> for RejectReason {
    fn from(r: Rejection) -> Self {
        match r {
            Rejection::AuthFailure => Self::AuthFailure,
            Rejection::ReplayDuplicate => Self::ReplayDuplicate,
            Rejection::ReplayTooOld => Self::ReplayTooOld,
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttackOutcome {
    Executed(Command),
    Rejected(RejectReason),
}

/// Hands raw bytes to a receiver the way a radio would.
pub fn deliver(target: &mut LinkEndpoint, bytes: &[u8]) -> AttackOutcome {
    let Ok(frame) = Frame::decode(bytes) else {
        return AttackOutcome::Rejected(RejectReason::Malformed);
    };
    match target.receive(&frame) {
        Ok(Delivery::Accepted(cmd)) => AttackOutcome::Executed(cmd),
        Ok(Delivery::Rejected(r)) => AttackOutcome::Rejected(r.into()),
        Err(_) => AttackOutcome::Rejected(RejectReason::Malformed),
    }
}

#[derive(Debug, Clone, Default)]
pub struct AdversaryState {
    captures: Vec<Observation>,
    codebook: Codebook,
}

impl AdversaryState {
    pub fn new() -> Self {
        Self::with_command_set_size(Command::ALL.len())
    }

    pub fn with_command_set_size(n: usize) -> Self {
        Self {
            captures: Vec::new(),
            codebook: Codebook::new(n),
        }
    }

    pub fn captures(&self) -> &[Observation] {
        &self.captures
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    /// Records the capture and learns `frame_bytes -> movement`. On an
    /// inconsistent pairing nothing is recorded.
    pub fn observe(&mut self, obs: Observation) -> Result<(), AdversaryError> {
        self.codebook.insert(&obs.frame_bytes, obs.movement)?;
        self.captures.push(obs);
        Ok(())
    }

    pub fn predict(&self, frame_bytes: &[u8]) -> Option<Command> {
        self.codebook.lookup(frame_bytes)
    }

    /// Re-sends capture `pick` to `target`.
    pub fn replay(&self, target: &mut LinkEndpoint, pick: usize) -> Result<AttackOutcome, AdversaryError> {
        let obs = self.captures.get(pick).ok_or(AdversaryError::NoSuchCapture {
            pick,
            len: self.captures.len(),
        })?;
        Ok(deliver(target, &obs.frame_bytes))
    }
}

/// Writes one `tick hex-frame movement` line per observation.
pub fn write_capture_log<W: Write>(mut out: W, captures: &[Observation]) -> io::Result<()> {
    for obs in captures {
        writeln!(out, "{} {} {}", obs.tick, hex::encode(&obs.frame_bytes), obs.movement)?;
    }
    Ok(())
}

/// Parses the format written by [`write_capture_log`]. Blank lines and lines
/// starting with `#` are skipped.
pub fn read_capture_log<R: BufRead>(input: R) -> Result<Vec<Observation>, AdversaryError> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let bad = |reason: String| AdversaryError::CaptureLog { line: idx + 1, reason };
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let [tick, frame, movement] = fields[..] else {
            return Err(bad(format!("expected 3 fields, got {}", fields.len())));
        };
        out.push(Observation {
            tick: tick.parse().map_err(|e| bad(format!("tick: {e}")))?,
            frame_bytes: hex::decode(frame).map_err(|e| bad(format!("frame: {e}")))?,
            movement: movement.parse().map_err(bad)?,
        });
    }
    Ok(out)
}
