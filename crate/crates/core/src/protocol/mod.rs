//! Command link between the wearer-side and prosthetic-side nodes: byte
//! framing with CRC-16, application-layer acks with bounded retransmission,
//! and the safety watchdog.

mod arq;
mod packet;
mod watchdog;

pub use arq::{
    send_reliable, DeliveryOutcome, PacketChannel, ReceiverAction, ReliabilityState,
    ReliableReceiver, ReliableSender, SenderPoll,
};
pub use packet::{
    crc16_ccitt_false, CommandPacket, MotionParams, PacketBody, PacketType, ProtocolError,
    TelemetryBody, PROTOCOL_VERSION, SYNC_BYTE,
};
pub use watchdog::{HaltAction, Watchdog, DEFAULT_WATCHDOG_TIMEOUT_MS};
