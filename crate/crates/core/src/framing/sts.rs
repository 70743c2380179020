//! Star-sensor frames: a leading type byte selects a fixed total length.

use super::DeframeEvent;

/// Longest star-sensor frame.
pub const STS_MAX_LEN: usize = 3120;

/// Message type byte → total frame length, type byte included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StsTypeTable {
    entries: [(u8, usize); 7],
}

impl Default for StsTypeTable {
    fn default() -> Self {
        StsTypeTable::standard()
    }
}

impl StsTypeTable {
    pub const fn standard() -> Self {
        StsTypeTable {
            entries: [
                (0x00, 152),
                (0x01, 16),
                (0xA0, 11),
                (0xA7, 3120),
                (0xA8, 180),
                (0x4D, 8),
                (0x02, 32),
            ],
        }
    }

    pub fn expected_length(&self, type_byte: u8) -> Option<usize> {
        self.entries
            .iter()
            .find(|(t, _)| *t == type_byte)
            .map(|&(_, len)| len)
    }

    pub fn entries(&self) -> &[(u8, usize)] {
        &self.entries
    }
}

pub fn sts_expected_length(type_byte: u8, table: &StsTypeTable) -> Option<usize> {
    table.expected_length(type_byte)
}

#[derive(Debug, Clone)]
pub struct StsDeframer {
    table: StsTypeTable,
    buf: Vec<u8>,
    expected: usize,
}

impl Default for StsDeframer {
    fn default() -> Self {
        StsDeframer::new(StsTypeTable::standard())
    }
}

impl StsDeframer {
    pub fn new(table: StsTypeTable) -> Self {
        StsDeframer {
            table,
            buf: Vec::new(),
            expected: 0,
        }
    }

    pub fn index(&self) -> usize {
        self.buf.len()
    }

    /// Length the current frame will complete at, if one is in progress.
    pub fn expected(&self) -> Option<usize> {
        (!self.buf.is_empty()).then_some(self.expected)
    }

    pub fn reset(&mut self) {
        self.buf.clear();
        self.expected = 0;
    }

    pub fn push(&mut self, byte: u8) -> DeframeEvent<Vec<u8>> {
        if self.buf.is_empty() {
            match self.table.expected_length(byte) {
                Some(len) => {
                    self.expected = len;
                    self.buf.reserve(len);
                }
                None => return DeframeEvent::Resync,
            }
        }
        self.buf.push(byte);
        if self.buf.len() == self.expected {
            self.expected = 0;
            DeframeEvent::Complete(std::mem::take(&mut self.buf))
        } else {
            DeframeEvent::Pending
        }
    }
}
