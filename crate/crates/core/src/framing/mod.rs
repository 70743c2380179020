//! Byte-at-a-time codecs for every subsystem protocol on the bus.
//!
//! All deframers are plain values owned by one receive task. Each `push`
//! consumes exactly one byte and reports what that byte did to the frame in
//! progress.

mod aux;
mod binary;
mod downlink;
mod gs;
mod sts;
mod wde;

use thiserror::Error;

pub use aux::{
    xor_checksum, AuxDeframer, AuxKind, BATTERY_FRAME_LEN, BATTERY_TYPE, CUSTOM_FRAME_LEN,
    CUSTOM_TYPE, GPS_MAX_LEN, GPS_START, GPS_TERMINATOR,
};
pub use binary::convert_to_bin;
pub use downlink::{DownlinkDeframer, DownlinkFrame};
pub use gs::{encode_gs_frame, wrap_downlink, GsDeframer, GsFrame};
pub use sts::{sts_expected_length, StsDeframer, StsTypeTable, STS_MAX_LEN};
pub use wde::{check_wde_reply, WdeDeframer};

/// Uplink/downlink start byte, `'#'`.
pub const GS_START: u8 = 0x23;
/// Uplink/downlink end byte, `'&'`.
pub const GS_END: u8 = 0x26;
/// Last byte of every wheel-drive reply.
pub const WDE_TERMINATOR: u8 = 0xAC;

/// Default accumulation cap for the ground-segment deframer.
pub const GS_DEFAULT_CAP: usize = 4096;
/// Default accumulation cap for the wheel-drive deframer.
pub const WDE_DEFAULT_CAP: usize = 4096;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FramingError {
    #[error("payload byte {byte:#04x} at offset {index} collides with a frame delimiter")]
    DelimiterInPayload { index: usize, byte: u8 },
    #[error("{field} byte {byte:#04x} is the frame start byte")]
    DelimiterInHeader { field: &'static str, byte: u8 },
    #[error("negative input {0}")]
    NegativeInput(i64),
}

/// What a single pushed byte did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeframeEvent<T> {
    /// Byte consumed (or discarded while idle); no frame yet.
    Pending,
    /// A start byte discarded any partial frame and began a new one.
    Reset,
    /// Accumulation cap exceeded; state cleared.
    Overflow,
    /// Byte did not fit the protocol; state cleared.
    Resync,
    Complete(T),
}

impl<T> DeframeEvent<T> {
    pub fn is_complete(&self) -> bool {
        matches!(self, DeframeEvent::Complete(_))
    }

    pub fn into_frame(self) -> Option<T> {
        match self {
            DeframeEvent::Complete(frame) => Some(frame),
            _ => None,
        }
    }
}

/// Subsystem-side protocol spoken on a port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    Wde,
    Sts,
    Battery,
    Gps,
    Custom,
}

/// Deframer for whatever protocol a subsystem port speaks.
#[derive(Debug, Clone)]
pub enum PayloadDeframer {
    Wde(WdeDeframer),
    Sts(StsDeframer),
    Aux(AuxDeframer),
}

impl PayloadDeframer {
    pub fn for_protocol(kind: ProtocolKind) -> Self {
        match kind {
            ProtocolKind::Wde => PayloadDeframer::Wde(WdeDeframer::new()),
            ProtocolKind::Sts => PayloadDeframer::Sts(StsDeframer::new(StsTypeTable::standard())),
            ProtocolKind::Battery => PayloadDeframer::Aux(AuxDeframer::new(AuxKind::Battery)),
            ProtocolKind::Gps => PayloadDeframer::Aux(AuxDeframer::new(AuxKind::Gps)),
            ProtocolKind::Custom => PayloadDeframer::Aux(AuxDeframer::new(AuxKind::Custom)),
        }
    }

    pub fn push(&mut self, byte: u8) -> DeframeEvent<Vec<u8>> {
        match self {
            PayloadDeframer::Wde(d) => d.push(byte),
            PayloadDeframer::Sts(d) => d.push(byte),
            PayloadDeframer::Aux(d) => d.push(byte),
        }
    }

    pub fn reset(&mut self) {
        match self {
            PayloadDeframer::Wde(d) => d.reset(),
            PayloadDeframer::Sts(d) => d.reset(),
            PayloadDeframer::Aux(d) => d.reset(),
        }
    }

    /// Bytes accumulated toward the current frame.
    pub fn index(&self) -> usize {
        match self {
            PayloadDeframer::Wde(d) => d.index(),
            PayloadDeframer::Sts(d) => d.index(),
            PayloadDeframer::Aux(d) => d.index(),
        }
    }
}
