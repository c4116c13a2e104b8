//! Stop-and-wait reliability: one outstanding packet, application-layer
//! acks, and at most two retransmissions before the failure is surfaced to
//! the caller.

use super::packet::{CommandPacket, PacketBody, ProtocolError};

pub const DEFAULT_RETRY_LIMIT: u8 = 2;
pub const DEFAULT_ACK_TIMEOUT_MS: u64 = 100;

/// Sender-side reliability parameters and sequence counter.
#[derive(Debug, Clone)]
pub struct ReliabilityState {
    pub next_seq: u8,
    pub retry_limit: u8,
    pub ack_timeout_ms: u64,
}

impl Default for ReliabilityState {
    fn default() -> Self {
        Self {
            next_seq: 0,
            retry_limit: DEFAULT_RETRY_LIMIT,
            ack_timeout_ms: DEFAULT_ACK_TIMEOUT_MS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryOutcome {
    Delivered { attempts: u32 },
    /// All attempts exhausted without an ack. Not an error: the caller
    /// decides the safety response.
    Failed { attempts: u32 },
}

impl DeliveryOutcome {
    pub fn is_delivered(&self) -> bool {
        matches!(self, DeliveryOutcome::Delivered { .. })
    }
}

/// Synchronous channel abstraction: transmit one frame and report the
/// acked sequence number, if an ack came back in time.
pub trait PacketChannel {
    fn exchange(&mut self, frame: &[u8]) -> Option<u8>;
}

impl<F: FnMut(&[u8]) -> Option<u8>> PacketChannel for F {
    fn exchange(&mut self, frame: &[u8]) -> Option<u8> {
        self(frame)
    }
}

/// Send one packet with stop-and-wait semantics over a synchronous channel:
/// transmit, await the matching ack, retransmit up to the retry limit.
pub fn send_reliable<C: PacketChannel>(
    state: &mut ReliabilityState,
    body: PacketBody,
    channel: &mut C,
) -> Result<DeliveryOutcome, ProtocolError> {
    let seq = state.next_seq;
    let frame = CommandPacket::new(seq, body).encode()?;
    let max_attempts = 1 + state.retry_limit as u32;
    let mut attempts = 0;
    while attempts < max_attempts {
        attempts += 1;
        if channel.exchange(&frame) == Some(seq) {
            state.next_seq = state.next_seq.wrapping_add(1);
            return Ok(DeliveryOutcome::Delivered { attempts });
        }
    }
    state.next_seq = state.next_seq.wrapping_add(1);
    Ok(DeliveryOutcome::Failed { attempts })
}

/// Event-driven sender used by the simulator: the same stop-and-wait rules,
/// driven by explicit time.
#[derive(Debug, Clone)]
pub struct ReliableSender {
    pub state: ReliabilityState,
    pending: Option<Pending>,
}

#[derive(Debug, Clone)]
struct Pending {
    frame: Vec<u8>,
    seq: u8,
    attempts: u32,
    deadline_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SenderPoll {
    /// Nothing outstanding.
    Idle,
    /// Waiting for an ack; no action yet.
    Waiting,
    /// Timeout elapsed: retransmit this frame.
    Retransmit { frame: Vec<u8>, attempt: u32 },
    /// All attempts exhausted.
    GaveUp { seq: u8, attempts: u32 },
}

impl ReliableSender {
    pub fn new(state: ReliabilityState) -> Self {
        Self {
            state,
            pending: None,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.pending.is_none()
    }

    /// Begin sending; returns the frame to transmit. Only one packet may be
    /// outstanding at a time.
    pub fn start(&mut self, body: PacketBody, now_ms: u64) -> Result<Vec<u8>, ProtocolError> {
        if self.pending.is_some() {
            return Err(ProtocolError::SenderBusy);
        }
        let seq = self.state.next_seq;
        self.state.next_seq = self.state.next_seq.wrapping_add(1);
        let frame = CommandPacket::new(seq, body).encode()?;
        self.pending = Some(Pending {
            frame: frame.clone(),
            seq,
            attempts: 1,
            deadline_ms: now_ms + self.state.ack_timeout_ms,
        });
        Ok(frame)
    }

    /// Handle a received ack; returns the outcome when it matches the
    /// outstanding sequence number.
    pub fn on_ack(&mut self, seq: u8) -> Option<DeliveryOutcome> {
        match &self.pending {
            Some(p) if p.seq == seq => {
                let attempts = p.attempts;
                self.pending = None;
                Some(DeliveryOutcome::Delivered { attempts })
            }
            _ => None,
        }
    }

    /// Check the retransmission timer.
    pub fn poll(&mut self, now_ms: u64) -> SenderPoll {
        let Some(p) = &mut self.pending else {
            return SenderPoll::Idle;
        };
        if now_ms < p.deadline_ms {
            return SenderPoll::Waiting;
        }
        if p.attempts > self.state.retry_limit as u32 {
            let (seq, attempts) = (p.seq, p.attempts);
            self.pending = None;
            return SenderPoll::GaveUp { seq, attempts };
        }
        p.attempts += 1;
        p.deadline_ms = now_ms + self.state.ack_timeout_ms;
        SenderPoll::Retransmit {
            frame: p.frame.clone(),
            attempt: p.attempts,
        }
    }
}

/// Receiver side: decodes frames, suppresses duplicates by sequence number
/// and produces the ack to send back.
///
/// The last two delivered sequence numbers are remembered, covering
/// retransmitted copies of the current packet and stale copies of the
/// previous one reordered within a one-packet horizon.
#[derive(Debug, Clone, Default)]
pub struct ReliableReceiver {
    recent: [Option<u8>; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverAction {
    /// Ack frame to transmit back (duplicates are re-acked).
    pub ack_frame: Vec<u8>,
    /// The packet to hand to the application, unless it was a duplicate.
    pub delivery: Option<CommandPacket>,
}

impl ReliableReceiver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn on_frame(&mut self, bytes: &[u8]) -> Result<ReceiverAction, ProtocolError> {
        let packet = CommandPacket::decode(bytes)?;
        let ack_frame = CommandPacket::ack(packet.seq).encode()?;
        let duplicate = self.recent.contains(&Some(packet.seq));
        if !duplicate {
            self.recent = [Some(packet.seq), self.recent[0]];
        }
        Ok(ReceiverAction {
            ack_frame,
            delivery: (!duplicate).then_some(packet),
        })
    }
}
