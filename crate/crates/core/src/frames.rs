//! MAC frame construction and the PHY-encapsulated wire format.
//!
//! Wire layout (all multi-octet fields little-endian):
//!
//! ```text
//! PHY:  preamble (4 x 0x00) | SFD 0xA7 | PHR (MAC octet count) | PSDU
//! MAC:  frame control (2) | sequence (1) | dest (2) | src (2) | [command id (1)] | MSDU | FCS (2)
//! ```
//!
//! Acknowledgements carry only frame control and sequence. Encoded sizes are
//! 384 bits for a beacon, 152 for data, 88 for an ack and 160 for a MAC
//! command frame.

use std::fmt;

use crc::{Crc, CRC_16_KERMIT};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PREAMBLE: [u8; 4] = [0x00; 4];
pub const START_OF_FRAME_DELIMITER: u8 = 0xA7;
/// Sync header plus PHY header.
pub const PHY_OVERHEAD_OCTETS: usize = 6;
pub const FCS_OCTETS: usize = 2;
pub const BEACON_ADDRESS_SLOTS: usize = 15;
pub const DATA_MSDU_OCTETS: usize = 4;
pub const COMMAND_MSDU_OCTETS: usize = 4;
pub const BEACON_MSDU_OCTETS: usize = 2 + 1 + 2 * BEACON_ADDRESS_SLOTS;

// x^16 + x^12 + x^5 + 1, zero initial register, LSB-first.
const FCS: Crc<u16> = Crc::<u16>::new(&CRC_16_KERMIT);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    #[error("{kind:?} MSDU must be {expected} octets, got {actual}")]
    InvalidPayloadLength {
        kind: FrameKind,
        expected: usize,
        actual: usize,
    },
    #[error("malformed {kind:?} header: {reason}")]
    InvalidHeader {
        kind: FrameKind,
        reason: &'static str,
    },
    #[error("frame is {bits} bits; expected a whole number of octets and at least 88 bits")]
    Truncated { bits: usize },
    #[error("sync header does not match preamble and start-of-frame delimiter")]
    BadSfd,
    #[error("PHY header declares {declared} MAC octets but {actual} follow")]
    LengthMismatch { declared: u8, actual: usize },
    #[error("frame check sequence {received:#06x} does not match computed {computed:#06x}")]
    FcsMismatch { received: u16, computed: u16 },
    #[error("unknown frame type {0}")]
    UnknownFrameType(u8),
    #[error("unknown MAC command {0:#04x}")]
    UnknownCommand(u8),
    #[error("reserved frame-control bits set: {0:#06x}")]
    ReservedBits(u16),
    #[error("packet scale {0} outside [0.5, 1.0]")]
    InvalidScale(f64),
}

/// 16-bit node address. `0xFFFF` is the broadcast / unassigned sentinel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ShortAddress(pub u16);

impl ShortAddress {
    pub const BROADCAST: ShortAddress = ShortAddress(0xFFFF);

    pub fn is_broadcast(self) -> bool {
        self == Self::BROADCAST
    }

    pub fn to_le_bytes(self) -> [u8; 2] {
        self.0.to_le_bytes()
    }

    pub fn from_le_bytes(bytes: [u8; 2]) -> Self {
        ShortAddress(u16::from_le_bytes(bytes))
    }
}

impl fmt::Display for ShortAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#06x}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrameKind {
    Beacon,
    Data,
    Ack,
    MacCommand,
}

impl FrameKind {
    pub const ALL: [FrameKind; 4] = [
        FrameKind::Beacon,
        FrameKind::Data,
        FrameKind::Ack,
        FrameKind::MacCommand,
    ];

    pub const fn type_code(self) -> u8 {
        match self {
            FrameKind::Beacon => 0,
            FrameKind::Data => 1,
            FrameKind::Ack => 2,
            FrameKind::MacCommand => 3,
        }
    }

    pub fn from_type_code(code: u8) -> Result<Self, FrameError> {
        match code {
            0 => Ok(FrameKind::Beacon),
            1 => Ok(FrameKind::Data),
            2 => Ok(FrameKind::Ack),
            3 => Ok(FrameKind::MacCommand),
            other => Err(FrameError::UnknownFrameType(other)),
        }
    }

    pub const fn mhr_octets(self) -> usize {
        match self {
            FrameKind::Beacon | FrameKind::Data => 7,
            FrameKind::Ack => 3,
            FrameKind::MacCommand => 8,
        }
    }

    pub const fn msdu_octets(self) -> usize {
        match self {
            FrameKind::Beacon => BEACON_MSDU_OCTETS,
            FrameKind::Data => DATA_MSDU_OCTETS,
            FrameKind::Ack => 0,
            FrameKind::MacCommand => COMMAND_MSDU_OCTETS,
        }
    }

    pub const fn mac_octets(self) -> usize {
        self.mhr_octets() + self.msdu_octets() + FCS_OCTETS
    }

    /// Full on-air size at scale 1.0, PHY overhead included.
    pub const fn base_bits(self) -> u32 {
        ((PHY_OVERHEAD_OCTETS + self.mac_octets()) * 8) as u32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum CommandId {
    AssociationRequest = 0x01,
    AssociationResponse = 0x02,
    DisassociationNotify = 0x03,
    DataRequest = 0x04,
}

impl CommandId {
    pub fn from_u8(value: u8) -> Result<Self, FrameError> {
        match value {
            0x01 => Ok(CommandId::AssociationRequest),
            0x02 => Ok(CommandId::AssociationResponse),
            0x03 => Ok(CommandId::DisassociationNotify),
            0x04 => Ok(CommandId::DataRequest),
            other => Err(FrameError::UnknownCommand(other)),
        }
    }
}

/// Fraction of the nominal frame size, restricted to `[0.5, 1.0]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PacketScale(f64);

impl PacketScale {
    pub const FULL: PacketScale = PacketScale(1.0);
    pub const HALF: PacketScale = PacketScale(0.5);

    pub fn new(value: f64) -> Result<Self, FrameError> {
        if (0.5..=1.0).contains(&value) {
            Ok(PacketScale(value))
        } else {
            Err(FrameError::InvalidScale(value))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PacketScale {
    type Error = FrameError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        PacketScale::new(value)
    }
}

impl From<PacketScale> for f64 {
    fn from(scale: PacketScale) -> f64 {
        scale.0
    }
}

/// `round(scale * base_bits)`, ties away from zero.
pub fn frame_bit_length(kind: FrameKind, scale: PacketScale) -> u32 {
    (scale.0 * kind.base_bits() as f64).round() as u32
}

pub fn compute_fcs(octets: &[u8]) -> u16 {
    FCS.checksum(octets)
}

/// The two-octet superframe specification field of a beacon.
///
/// Bits 0-7 carry the beacon interval in minutes, bits 8-11 the final CAP
/// slot, bit 14 the PAN-coordinator flag and bit 15 association permit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuperframeSpec {
    pub beacon_interval_minutes: u8,
    pub final_cap_slot: u8,
    pub pan_coordinator: bool,
    pub association_permit: bool,
}

impl SuperframeSpec {
    pub fn pack(self) -> u16 {
        u16::from(self.beacon_interval_minutes)
            | (u16::from(self.final_cap_slot & 0x0F) << 8)
            | (u16::from(self.pan_coordinator) << 14)
            | (u16::from(self.association_permit) << 15)
    }

    pub fn unpack(raw: u16) -> Self {
        SuperframeSpec {
            beacon_interval_minutes: (raw & 0xFF) as u8,
            final_cap_slot: ((raw >> 8) & 0x0F) as u8,
            pan_coordinator: raw & (1 << 14) != 0,
            association_permit: raw & (1 << 15) != 0,
        }
    }
}

/// Decoded beacon MSDU.
///
/// The address list has exactly 15 entries, unused ones set to broadcast.
/// The first `pending_count` entries are the members with queued downlink data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BeaconPayload {
    pub superframe_spec: u16,
    pub pending_count: u8,
    pub addresses: [ShortAddress; BEACON_ADDRESS_SLOTS],
}

impl BeaconPayload {
    pub fn to_msdu(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(BEACON_MSDU_OCTETS);
        out.extend_from_slice(&self.superframe_spec.to_le_bytes());
        out.push(self.pending_count);
        for a in &self.addresses {
            out.extend_from_slice(&a.to_le_bytes());
        }
        out
    }

    pub fn from_msdu(msdu: &[u8]) -> Result<Self, FrameError> {
        if msdu.len() != BEACON_MSDU_OCTETS {
            return Err(FrameError::InvalidPayloadLength {
                kind: FrameKind::Beacon,
                expected: BEACON_MSDU_OCTETS,
                actual: msdu.len(),
            });
        }
        let mut addresses = [ShortAddress::BROADCAST; BEACON_ADDRESS_SLOTS];
        for (slot, pair) in addresses.iter_mut().zip(msdu[3..].chunks_exact(2)) {
            *slot = ShortAddress::from_le_bytes([pair[0], pair[1]]);
        }
        Ok(BeaconPayload {
            superframe_spec: u16::from_le_bytes([msdu[0], msdu[1]]),
            pending_count: msdu[2],
            addresses,
        })
    }

    /// Listed addresses, broadcast padding excluded.
    pub fn listed(&self) -> impl Iterator<Item = ShortAddress> + '_ {
        self.addresses.iter().copied().filter(|a| !a.is_broadcast())
    }

    pub fn is_pending_for(&self, addr: ShortAddress) -> bool {
        self.addresses[..usize::from(self.pending_count).min(BEACON_ADDRESS_SLOTS)].contains(&addr)
    }
}

/// A MAC frame of any of the four kinds.
///
/// `dest`/`src` are absent for acks, `command` is present only for MAC
/// command frames. The FCS is not stored; it is computed on encode and
/// verified on decode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MacFrame {
    pub kind: FrameKind,
    pub ack_request: bool,
    pub frame_pending: bool,
    pub sequence: u8,
    pub dest: Option<ShortAddress>,
    pub src: Option<ShortAddress>,
    pub command: Option<CommandId>,
    pub payload: Vec<u8>,
}

const FC_TYPE_MASK: u16 = 0b111;
const FC_ACK_REQUEST: u16 = 1 << 3;
const FC_FRAME_PENDING: u16 = 1 << 4;
const FC_RESERVED: u16 = !(FC_TYPE_MASK | FC_ACK_REQUEST | FC_FRAME_PENDING);

impl MacFrame {
    pub fn beacon(sequence: u8, src: ShortAddress, payload: &BeaconPayload) -> Self {
        MacFrame {
            kind: FrameKind::Beacon,
            ack_request: false,
            frame_pending: payload.pending_count > 0,
            sequence,
            dest: Some(ShortAddress::BROADCAST),
            src: Some(src),
            command: None,
            payload: payload.to_msdu(),
        }
    }

    pub fn data(sequence: u8, src: ShortAddress, dest: ShortAddress, payload: [u8; 4]) -> Self {
        MacFrame {
            kind: FrameKind::Data,
            ack_request: true,
            frame_pending: false,
            sequence,
            dest: Some(dest),
            src: Some(src),
            command: None,
            payload: payload.to_vec(),
        }
    }

    pub fn ack(sequence: u8) -> Self {
        MacFrame {
            kind: FrameKind::Ack,
            ack_request: false,
            frame_pending: false,
            sequence,
            dest: None,
            src: None,
            command: None,
            payload: Vec::new(),
        }
    }

    pub fn command(
        sequence: u8,
        src: ShortAddress,
        dest: ShortAddress,
        command: CommandId,
        payload: [u8; 4],
    ) -> Self {
        MacFrame {
            kind: FrameKind::MacCommand,
            ack_request: true,
            frame_pending: false,
            sequence,
            dest: Some(dest),
            src: Some(src),
            command: Some(command),
            payload: payload.to_vec(),
        }
    }

    /// Parses the MSDU of a beacon frame.
    pub fn beacon_payload(&self) -> Option<BeaconPayload> {
        match self.kind {
            FrameKind::Beacon => BeaconPayload::from_msdu(&self.payload).ok(),
            _ => None,
        }
    }

    fn frame_control(&self) -> u16 {
        u16::from(self.kind.type_code())
            | if self.ack_request { FC_ACK_REQUEST } else { 0 }
            | if self.frame_pending {
                FC_FRAME_PENDING
            } else {
                0
            }
    }

    fn check_header(&self) -> Result<(), FrameError> {
        let kind = self.kind;
        let addressed = kind != FrameKind::Ack;
        if self.dest.is_some() != addressed || self.src.is_some() != addressed {
            return Err(FrameError::InvalidHeader {
                kind,
                reason: if addressed {
                    "dest and src are required"
                } else {
                    "acks carry no addresses"
                },
            });
        }
        if self.command.is_some() != (kind == FrameKind::MacCommand) {
            return Err(FrameError::InvalidHeader {
                kind,
                reason: "command id present iff MAC command frame",
            });
        }
        if self.payload.len() != kind.msdu_octets() {
            return Err(FrameError::InvalidPayloadLength {
                kind,
                expected: kind.msdu_octets(),
                actual: self.payload.len(),
            });
        }
        Ok(())
    }

    /// MHR + MSDU + FCS.
    pub fn to_mac_octets(&self) -> Result<Vec<u8>, FrameError> {
        self.check_header()?;
        let mut out = Vec::with_capacity(self.kind.mac_octets());
        out.extend_from_slice(&self.frame_control().to_le_bytes());
        out.push(self.sequence);
        if let (Some(dest), Some(src)) = (self.dest, self.src) {
            out.extend_from_slice(&dest.to_le_bytes());
            out.extend_from_slice(&src.to_le_bytes());
        }
        if let Some(cmd) = self.command {
            out.push(cmd as u8);
        }
        out.extend_from_slice(&self.payload);
        let fcs = compute_fcs(&out);
        out.extend_from_slice(&fcs.to_le_bytes());
        debug_assert_eq!(out.len(), self.kind.mac_octets());
        Ok(out)
    }
}

/// Serializes a frame with its PHY encapsulation. The result is always
/// `frame_bit_length(kind, 1.0) / 8` octets long.
pub fn encode_frame(frame: &MacFrame) -> Result<Vec<u8>, FrameError> {
    let mac = frame.to_mac_octets()?;
    let mut out = Vec::with_capacity(PHY_OVERHEAD_OCTETS + mac.len());
    out.extend_from_slice(&PREAMBLE);
    out.push(START_OF_FRAME_DELIMITER);
    // At most 42 MAC octets, so the 7-bit length field always suffices.
    out.push(mac.len() as u8);
    out.extend_from_slice(&mac);
    Ok(out)
}

/// Parses a PHY frame, checking sync header, length and FCS in that order.
pub fn decode_frame(octets: &[u8]) -> Result<MacFrame, FrameError> {
    let min = PHY_OVERHEAD_OCTETS + FrameKind::Ack.mac_octets();
    if octets.len() < min {
        return Err(FrameError::Truncated {
            bits: octets.len() * 8,
        });
    }
    if octets[..4] != PREAMBLE || octets[4] != START_OF_FRAME_DELIMITER {
        return Err(FrameError::BadSfd);
    }
    let declared = octets[5];
    let mac = &octets[PHY_OVERHEAD_OCTETS..];
    if usize::from(declared) != mac.len() {
        return Err(FrameError::LengthMismatch {
            declared,
            actual: mac.len(),
        });
    }
    let (body, fcs) = mac.split_at(mac.len() - FCS_OCTETS);
    let received = u16::from_le_bytes([fcs[0], fcs[1]]);
    let computed = compute_fcs(body);
    if received != computed {
        return Err(FrameError::FcsMismatch { received, computed });
    }

    let fc = u16::from_le_bytes([body[0], body[1]]);
    let kind = FrameKind::from_type_code((fc & FC_TYPE_MASK) as u8)?;
    if fc & FC_RESERVED != 0 {
        return Err(FrameError::ReservedBits(fc & FC_RESERVED));
    }
    if mac.len() != kind.mac_octets() {
        return Err(FrameError::InvalidPayloadLength {
            kind,
            expected: kind.msdu_octets(),
            actual: mac.len().saturating_sub(kind.mhr_octets() + FCS_OCTETS),
        });
    }
    let sequence = body[2];
    let (dest, src) = if kind == FrameKind::Ack {
        (None, None)
    } else {
        (
            Some(ShortAddress::from_le_bytes([body[3], body[4]])),
            Some(ShortAddress::from_le_bytes([body[5], body[6]])),
        )
    };
    let command = if kind == FrameKind::MacCommand {
        Some(CommandId::from_u8(body[7])?)
    } else {
        None
    };
    Ok(MacFrame {
        kind,
        ack_request: fc & FC_ACK_REQUEST != 0,
        frame_pending: fc & FC_FRAME_PENDING != 0,
        sequence,
        dest,
        src,
        command,
        payload: body[kind.mhr_octets()..].to_vec(),
    })
}

/// Expands octets into the transmitted bit order (LSB of each octet first).
pub fn to_bits(octets: &[u8]) -> Vec<bool> {
    octets
        .iter()
        .flat_map(|&b| (0..8).map(move |i| b >> i & 1 == 1))
        .collect()
}

pub fn from_bits(bits: &[bool]) -> Result<Vec<u8>, FrameError> {
    if !bits.len().is_multiple_of(8) {
        return Err(FrameError::Truncated { bits: bits.len() });
    }
    Ok(bits
        .chunks_exact(8)
        .map(|c| c.iter().rev().fold(0u8, |acc, &b| acc << 1 | u8::from(b)))
        .collect())
}

/// [`encode_frame`] as a bit sequence.
pub fn encode_frame_bits(frame: &MacFrame) -> Result<Vec<bool>, FrameError> {
    encode_frame(frame).map(|o| to_bits(&o))
}

/// [`decode_frame`] from a bit sequence.
pub fn decode_frame_bits(bits: &[bool]) -> Result<MacFrame, FrameError> {
    decode_frame(&from_bits(bits)?)
}

/// Space-separated lowercase hex, 16 octets per line.
pub fn hex_dump(octets: &[u8]) -> String {
    octets
        .chunks(16)
        .map(|line| {
            line.iter()
                .map(|b| format!("{b:02x}"))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n")
}
