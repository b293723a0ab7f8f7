use serde::{Deserialize, Serialize};

pub const WINDOW_SIZE: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WindowVerdict {
    Accept,
    Duplicate,
    TooOld,
}

/// Anti-replay window: highest sequence number seen plus a 64-bit bitmap.
///
/// Bit `i` of `mask` records whether `highest - i` has been accepted.
/// `highest == 0` means nothing has been accepted yet; sequence 0 is never valid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ReplayWindow {
    highest: u32,
    mask: u64,
}

impl ReplayWindow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn highest(&self) -> u32 {
        self.highest
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    /// Classifies `seq` without modifying the window.
    pub fn check(&self, seq: u32) -> WindowVerdict {
        if seq == 0 {
            return WindowVerdict::TooOld;
        }
        if seq > self.highest {
            return WindowVerdict::Accept;
        }
        let offset = self.highest - seq;
        if offset >= WINDOW_SIZE {
            WindowVerdict::TooOld
        } else if self.mask & (1 << offset) != 0 {
            WindowVerdict::Duplicate
        } else {
            WindowVerdict::Accept
        }
    }

    /// Marks `seq` as seen. Only meaningful after `check` returned `Accept`.
    pub fn update(&mut self, seq: u32) {
        if seq > self.highest {
            let shift = seq - self.highest;
            self.mask = if shift >= WINDOW_SIZE { 0 } else { self.mask << shift };
            self.mask |= 1;
            self.highest = seq;
        } else {
            self.mask |= 1 << (self.highest - seq);
        }
    }

    pub fn check_and_update(&mut self, seq: u32) -> WindowVerdict {
        let verdict = self.check(seq);
        if verdict == WindowVerdict::Accept {
            self.update(seq);
        }
        verdict
    }
}
