//! Housekeeping subsystems: battery, GPS receiver and the custom
//! temperature/current/voltage board.
//!
//! ```text
//! battery  B1 seq v_hi v_lo i_hi i_lo chk AC                     (8 bytes)
//! custom   C1 seq t_hi t_lo v_hi v_lo i_hi i_lo chk AC           (10 bytes)
//! gps      $…printable…\n                                         (≤ 128 bytes)
//! ```
//!
//! `chk` is the XOR of every byte before it. Binary frames are matched by
//! fixed length, so 0xAC inside the data is harmless.

use super::{DeframeEvent, WDE_TERMINATOR};

pub const BATTERY_TYPE: u8 = 0xB1;
pub const BATTERY_FRAME_LEN: usize = 8;
pub const CUSTOM_TYPE: u8 = 0xC1;
pub const CUSTOM_FRAME_LEN: usize = 10;
pub const GPS_START: u8 = b'$';
pub const GPS_TERMINATOR: u8 = b'\n';
pub const GPS_MAX_LEN: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AuxKind {
    Battery,
    Gps,
    Custom,
}

pub fn xor_checksum(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0, |acc, b| acc ^ b)
}

#[derive(Debug, Clone)]
pub struct AuxDeframer {
    kind: AuxKind,
    buf: Vec<u8>,
}

impl AuxDeframer {
    pub fn new(kind: AuxKind) -> Self {
        AuxDeframer {
            kind,
            buf: Vec::new(),
        }
    }

    pub fn kind(&self) -> AuxKind {
        self.kind
    }

    pub fn index(&self) -> usize {
        self.buf.len()
    }

    pub fn reset(&mut self) {
        self.buf.clear();
    }

    pub fn push(&mut self, byte: u8) -> DeframeEvent<Vec<u8>> {
        match self.kind {
            AuxKind::Battery => self.push_fixed(byte, BATTERY_TYPE, BATTERY_FRAME_LEN),
            AuxKind::Custom => self.push_fixed(byte, CUSTOM_TYPE, CUSTOM_FRAME_LEN),
            AuxKind::Gps => self.push_line(byte),
        }
    }

    fn push_fixed(&mut self, byte: u8, type_byte: u8, len: usize) -> DeframeEvent<Vec<u8>> {
        if self.buf.is_empty() && byte != type_byte {
            return DeframeEvent::Resync;
        }
        self.buf.push(byte);
        if self.buf.len() < len {
            return DeframeEvent::Pending;
        }
        let frame = std::mem::take(&mut self.buf);
        let chk_at = len - 2;
        if frame[len - 1] == WDE_TERMINATOR && xor_checksum(&frame[..chk_at]) == frame[chk_at] {
            DeframeEvent::Complete(frame)
        } else {
            DeframeEvent::Resync
        }
    }

    fn push_line(&mut self, byte: u8) -> DeframeEvent<Vec<u8>> {
        if self.buf.is_empty() && byte != GPS_START {
            return DeframeEvent::Resync;
        }
        if byte == GPS_TERMINATOR {
            self.buf.push(byte);
            return DeframeEvent::Complete(std::mem::take(&mut self.buf));
        }
        if !(byte.is_ascii_graphic() || byte == b' ' || byte == b'\r') {
            self.buf.clear();
            return DeframeEvent::Resync;
        }
        if self.buf.len() + 1 >= GPS_MAX_LEN {
            self.buf.clear();
            return DeframeEvent::Overflow;
        }
        self.buf.push(byte);
        DeframeEvent::Pending
    }
}
