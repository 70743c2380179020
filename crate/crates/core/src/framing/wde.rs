use super::{DeframeEvent, WDE_DEFAULT_CAP, WDE_TERMINATOR};

/// Wheel-drive reply deframer: everything up to and including 0xAC.
#[derive(Debug, Clone)]
pub struct WdeDeframer {
    buf: Vec<u8>,
    cap: usize,
}

impl Default for WdeDeframer {
    fn default() -> Self {
        WdeDeframer::new()
    }
}

impl WdeDeframer {
    pub fn new() -> Self {
        WdeDeframer::with_cap(WDE_DEFAULT_CAP)
    }

    pub fn with_cap(cap: usize) -> Self {
        WdeDeframer {
            buf: Vec::new(),
            cap: cap.max(1),
        }
    }

    pub fn index(&self) -> usize {
        self.buf.len()
    }

    pub fn reset(&mut self) {
        self.buf.clear();
    }

    pub fn push(&mut self, byte: u8) -> DeframeEvent<Vec<u8>> {
        if self.buf.len() >= self.cap {
            self.buf.clear();
            return DeframeEvent::Overflow;
        }
        self.buf.push(byte);
        if byte == WDE_TERMINATOR {
            DeframeEvent::Complete(std::mem::take(&mut self.buf))
        } else {
            DeframeEvent::Pending
        }
    }
}

/// A well-formed reply ends with 0xAC and has no other 0xAC.
pub fn check_wde_reply(reply: &[u8]) -> bool {
    match reply.split_last() {
        Some((&last, body)) => last == WDE_TERMINATOR && !body.contains(&WDE_TERMINATOR),
        None => false,
    }
}
