//! Byte-exact wire format.
//!
//! Every frame is laid out as
//!
//! ```text
//! offset  size  field
//! 0       1     sync byte 0xAA
//! 1       1     protocol version (currently 1)
//! 2       1     message type
//! 3       1     sequence number (wrapping)
//! 4       1     payload length
//! 5       n     payload (see below)
//! 5+n     2     CRC-16/CCITT-FALSE over bytes 0..5+n, big-endian
//! ```
//!
//! Payload layouts by message type:
//!
//! * `HandToggle` (0x01): empty (node defaults) or `duration_ms:u16 le,
//!   speed:u8`.
//! * `ElbowMove` (0x02): `direction:u8 (0 extend, 1 flex), duration_ms:u16
//!   le, speed:u8`.
//! * `Telemetry` (0x03): `0x00, battery_pct:u8, link_ok:u8` for a status
//!   report, or `0x01` for a resume request that clears a latched halt.
//! * `Ack` (0x04): empty; the sequence field echoes the acked frame.
//! * `Halt` (0x05): empty.

use thiserror::Error;

use crate::emg::ElbowDirection;

pub const SYNC_BYTE: u8 = 0xAA;
pub const PROTOCOL_VERSION: u8 = 1;
/// Header bytes before the payload plus the trailing CRC.
pub const FRAME_OVERHEAD: usize = 7;
pub const MAX_PAYLOAD_LEN: usize = u8::MAX as usize;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("frame too short: {0} bytes")]
    TooShort(usize),
    #[error("bad sync byte {0:#04x}")]
    BadSync(u8),
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown message type {0:#04x}")]
    UnknownType(u8),
    #[error("frame length {actual} does not match declared payload {declared}")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("checksum mismatch: expected {expected:#06x}, found {found:#06x}")]
    ChecksumMismatch { expected: u16, found: u16 },
    #[error("invalid payload for {0:?}")]
    BadPayload(PacketType),
    #[error("payload exceeds {MAX_PAYLOAD_LEN} bytes")]
    OversizedPayload,
    #[error("sender already has an unacked packet pending")]
    SenderBusy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacketType {
    HandToggle = 0x01,
    ElbowMove = 0x02,
    Telemetry = 0x03,
    Ack = 0x04,
    Halt = 0x05,
}

impl PacketType {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0x01 => Some(PacketType::HandToggle),
            0x02 => Some(PacketType::ElbowMove),
            0x03 => Some(PacketType::Telemetry),
            0x04 => Some(PacketType::Ack),
            0x05 => Some(PacketType::Halt),
            _ => None,
        }
    }
}

/// Duration and speed carried by motion commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MotionParams {
    pub duration_ms: u16,
    /// 0-255 scalar; scales the actuator's velocity when no explicit
    /// duration is given.
    pub speed: u8,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self {
            duration_ms: 150,
            speed: 128,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TelemetryBody {
    Status { battery_pct: u8, link_ok: bool },
    Resume,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PacketBody {
    HandToggle { motion: Option<MotionParams> },
    ElbowMove {
        direction: ElbowDirection,
        motion: MotionParams,
    },
    Telemetry(TelemetryBody),
    Ack,
    Halt,
}

impl PacketBody {
    pub fn packet_type(&self) -> PacketType {
        match self {
            PacketBody::HandToggle { .. } => PacketType::HandToggle,
            PacketBody::ElbowMove { .. } => PacketType::ElbowMove,
            PacketBody::Telemetry(_) => PacketType::Telemetry,
            PacketBody::Ack => PacketType::Ack,
            PacketBody::Halt => PacketType::Halt,
        }
    }

    fn payload(&self) -> Vec<u8> {
        match self {
            PacketBody::HandToggle { motion: None } => Vec::new(),
            PacketBody::HandToggle {
                motion: Some(motion),
            } => {
                let d = motion.duration_ms.to_le_bytes();
                vec![d[0], d[1], motion.speed]
            }
            PacketBody::ElbowMove { direction, motion } => {
                let d = motion.duration_ms.to_le_bytes();
                let dir = match direction {
                    ElbowDirection::Extend => 0u8,
                    ElbowDirection::Flex => 1u8,
                };
                vec![dir, d[0], d[1], motion.speed]
            }
            PacketBody::Telemetry(TelemetryBody::Status {
                battery_pct,
                link_ok,
            }) => vec![0x00, *battery_pct, u8::from(*link_ok)],
            PacketBody::Telemetry(TelemetryBody::Resume) => vec![0x01],
            PacketBody::Ack | PacketBody::Halt => Vec::new(),
        }
    }

    fn from_payload(ty: PacketType, payload: &[u8]) -> Result<Self, ProtocolError> {
        match ty {
            PacketType::HandToggle => match payload {
                [] => Ok(PacketBody::HandToggle { motion: None }),
                [d0, d1, speed] => Ok(PacketBody::HandToggle {
                    motion: Some(MotionParams {
                        duration_ms: u16::from_le_bytes([*d0, *d1]),
                        speed: *speed,
                    }),
                }),
                _ => Err(ProtocolError::BadPayload(ty)),
            },
            PacketType::ElbowMove => match payload {
                [dir, d0, d1, speed] => {
                    let direction = match dir {
                        0 => ElbowDirection::Extend,
                        1 => ElbowDirection::Flex,
                        _ => return Err(ProtocolError::BadPayload(ty)),
                    };
                    Ok(PacketBody::ElbowMove {
                        direction,
                        motion: MotionParams {
                            duration_ms: u16::from_le_bytes([*d0, *d1]),
                            speed: *speed,
                        },
                    })
                }
                _ => Err(ProtocolError::BadPayload(ty)),
            },
            PacketType::Telemetry => match payload {
                [0x00, battery, link] => Ok(PacketBody::Telemetry(TelemetryBody::Status {
                    battery_pct: *battery,
                    link_ok: *link != 0,
                })),
                [0x01] => Ok(PacketBody::Telemetry(TelemetryBody::Resume)),
                _ => Err(ProtocolError::BadPayload(ty)),
            },
            PacketType::Ack => {
                if payload.is_empty() {
                    Ok(PacketBody::Ack)
                } else {
                    Err(ProtocolError::BadPayload(ty))
                }
            }
            PacketType::Halt => {
                if payload.is_empty() {
                    Ok(PacketBody::Halt)
                } else {
                    Err(ProtocolError::BadPayload(ty))
                }
            }
        }
    }
}

/// One framed message. `decode(encode(p)) == p` for every valid packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandPacket {
    pub version: u8,
    pub seq: u8,
    pub body: PacketBody,
}

impl CommandPacket {
    pub fn new(seq: u8, body: PacketBody) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            seq,
            body,
        }
    }

    pub fn ack(seq: u8) -> Self {
        Self::new(seq, PacketBody::Ack)
    }

    pub fn encode(&self) -> Result<Vec<u8>, ProtocolError> {
        let payload = self.body.payload();
        if payload.len() > MAX_PAYLOAD_LEN {
            return Err(ProtocolError::OversizedPayload);
        }
        let mut frame = Vec::with_capacity(FRAME_OVERHEAD + payload.len());
        frame.push(SYNC_BYTE);
        frame.push(self.version);
        frame.push(self.body.packet_type() as u8);
        frame.push(self.seq);
        frame.push(payload.len() as u8);
        frame.extend_from_slice(&payload);
        let crc = crc16_ccitt_false(&frame);
        frame.extend_from_slice(&crc.to_be_bytes());
        Ok(frame)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        if bytes.len() < FRAME_OVERHEAD {
            return Err(ProtocolError::TooShort(bytes.len()));
        }
        if bytes[0] != SYNC_BYTE {
            return Err(ProtocolError::BadSync(bytes[0]));
        }
        let declared = bytes[4] as usize;
        if bytes.len() != FRAME_OVERHEAD + declared {
            return Err(ProtocolError::LengthMismatch {
                declared,
                actual: bytes.len(),
            });
        }
        let body_end = bytes.len() - 2;
        let expected = crc16_ccitt_false(&bytes[..body_end]);
        let found = u16::from_be_bytes([bytes[body_end], bytes[body_end + 1]]);
        if expected != found {
            return Err(ProtocolError::ChecksumMismatch { expected, found });
        }
        if bytes[1] != PROTOCOL_VERSION {
            return Err(ProtocolError::UnsupportedVersion(bytes[1]));
        }
        let ty = PacketType::from_byte(bytes[2]).ok_or(ProtocolError::UnknownType(bytes[2]))?;
        let body = PacketBody::from_payload(ty, &bytes[5..body_end])?;
        Ok(Self {
            version: bytes[1],
            seq: bytes[3],
            body,
        })
    }
}

/// CRC-16/CCITT-FALSE: polynomial 0x1021, initial value 0xFFFF, no
/// reflection, no final xor. Check value for "123456789" is 0x29B1.
pub fn crc16_ccitt_false(bytes: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &byte in bytes {
        crc ^= (byte as u16) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 {
                (crc << 1) ^ 0x1021
            } else {
                crc << 1
            };
        }
    }
    crc
}
