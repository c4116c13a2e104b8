//! Software watchdog on the prosthetic-side node: halts motion when no
//! valid command has arrived within the timeout. The halt is edge-triggered
//! and latching; only an explicit resume clears it.

pub const DEFAULT_WATCHDOG_TIMEOUT_MS: u64 = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HaltAction {
    pub at_ms: u64,
    pub last_valid_ms: u64,
}

#[derive(Debug, Clone)]
pub struct Watchdog {
    last_valid_ms: u64,
    timeout_ms: u64,
    halted: bool,
}

impl Watchdog {
    pub fn new(timeout_ms: u64, now_ms: u64) -> Self {
        Self {
            last_valid_ms: now_ms,
            timeout_ms,
            halted: false,
        }
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn timeout_ms(&self) -> u64 {
        self.timeout_ms
    }

    /// Record a valid received command. Has no effect while halted; the
    /// latch requires an explicit resume.
    pub fn refresh(&mut self, now_ms: u64) {
        if !self.halted {
            self.last_valid_ms = now_ms;
        }
    }

    /// Advance time. Emits the halt action exactly once, on the first tick
    /// where the timeout is strictly exceeded.
    pub fn tick(&mut self, now_ms: u64) -> Option<HaltAction> {
        if self.halted {
            return None;
        }
        if now_ms.saturating_sub(self.last_valid_ms) > self.timeout_ms {
            self.halted = true;
            return Some(HaltAction {
                at_ms: now_ms,
                last_valid_ms: self.last_valid_ms,
            });
        }
        None
    }

    /// Clear a latched halt and restart the timer.
    pub fn resume(&mut self, now_ms: u64) {
        self.halted = false;
        self.last_valid_ms = now_ms;
    }
}
