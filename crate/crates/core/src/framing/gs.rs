//! Ground-segment envelope: `'#' id reserved payload… '&'` on uplink,
//! `'#' id payload… '&'` on downlink.

use super::{DeframeEvent, FramingError, GS_DEFAULT_CAP, GS_END, GS_START};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GsFrame {
    pub subsystem_id: u8,
    /// Carried through, never forwarded.
    pub reserved: u8,
    pub payload: Vec<u8>,
}

impl GsFrame {
    pub fn new(subsystem_id: u8, payload: impl Into<Vec<u8>>) -> Self {
        GsFrame {
            subsystem_id,
            reserved: 0x00,
            payload: payload.into(),
        }
    }

    pub fn validate(&self) -> Result<(), FramingError> {
        // id/reserved may be '&' (the deframer only completes at index >= 4)
        // but a '#' there would restart the frame
        if self.subsystem_id == GS_START {
            return Err(FramingError::DelimiterInHeader {
                field: "subsystem id",
                byte: GS_START,
            });
        }
        if self.reserved == GS_START {
            return Err(FramingError::DelimiterInHeader {
                field: "reserved",
                byte: GS_START,
            });
        }
        if let Some(index) = self.payload.iter().position(|&b| b == GS_START || b == GS_END) {
            return Err(FramingError::DelimiterInPayload {
                index,
                byte: self.payload[index],
            });
        }
        Ok(())
    }

    pub fn encoded_len(&self) -> usize {
        self.payload.len() + 4
    }
}

pub fn encode_gs_frame(frame: &GsFrame) -> Result<Vec<u8>, FramingError> {
    frame.validate()?;
    let mut out = Vec::with_capacity(frame.encoded_len());
    out.push(GS_START);
    out.push(frame.subsystem_id);
    out.push(frame.reserved);
    out.extend_from_slice(&frame.payload);
    out.push(GS_END);
    Ok(out)
}

/// Downlink envelope. No reserved byte and no payload check.
pub fn wrap_downlink(subsystem_id: u8, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + 3);
    out.push(GS_START);
    out.push(subsystem_id);
    out.extend_from_slice(payload);
    out.push(GS_END);
    out
}

/// Uplink deframer.
#[derive(Debug, Clone)]
pub struct GsDeframer {
    buf: Vec<u8>,
    cap: usize,
}

impl Default for GsDeframer {
    fn default() -> Self {
        GsDeframer::new()
    }
}

impl GsDeframer {
    pub fn new() -> Self {
        GsDeframer::with_cap(GS_DEFAULT_CAP)
    }

    pub fn with_cap(cap: usize) -> Self {
        GsDeframer {
            buf: Vec::new(),
            cap: cap.max(4),
        }
    }

    pub fn index(&self) -> usize {
        self.buf.len()
    }

    pub fn reset(&mut self) {
        self.buf.clear();
    }

    pub fn push(&mut self, byte: u8) -> DeframeEvent<GsFrame> {
        if byte == GS_START {
            self.buf.clear();
            self.buf.push(byte);
            return DeframeEvent::Reset;
        }
        if self.buf.is_empty() {
            return DeframeEvent::Pending;
        }
        if self.buf.len() >= self.cap {
            self.buf.clear();
            return DeframeEvent::Overflow;
        }
        self.buf.push(byte);
        if byte == GS_END && self.buf.len() >= 4 {
            let end = self.buf.len() - 1;
            let frame = GsFrame {
                subsystem_id: self.buf[1],
                reserved: self.buf[2],
                payload: self.buf[3..end].to_vec(),
            };
            self.buf.clear();
            return DeframeEvent::Complete(frame);
        }
        DeframeEvent::Pending
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn push_all(d: &mut GsDeframer, bytes: &[u8]) -> Vec<DeframeEvent<GsFrame>> {
        bytes.iter().map(|&b| d.push(b)).collect()
    }

    /// Literal transcription of the reference receive loop: reset on '#',
    /// store every byte, and on '&' with buf[0] == '#' take id = buf[1] and
    /// forward buf[3..index-1]. Never clears after a hit.
    fn reference_trace(stream: &[u8]) -> Vec<(u8, Vec<u8>)> {
        let mut buf = [0u8; 8192];
        let mut index = 0usize;
        let mut out = Vec::new();
        for &c in stream {
            if c == b'#' {
                index = 0;
                buf = [0u8; 8192];
            }
            buf[index] = c;
            index += 1;
            if buf[0] == b'#' && c == b'&' {
                let payload = if index > 4 { buf[3..index - 1].to_vec() } else { Vec::new() };
                out.push((buf[1], payload));
            }
        }
        out
    }

    #[test]
    fn encodes_layout() {
        let f = GsFrame::new(0x01, vec![0xAA, 0xBB]);
        assert_eq!(encode_gs_frame(&f).unwrap(), vec![0x23, 0x01, 0x00, 0xAA, 0xBB, 0x26]);
        assert_eq!(reference_trace(&encode_gs_frame(&f).unwrap()), vec![(0x01, vec![0xAA, 0xBB])]);

        let empty = GsFrame::new(0x01, vec![]);
        assert_eq!(encode_gs_frame(&empty).unwrap(), vec![0x23, 0x01, 0x00, 0x26]);
        assert_eq!(empty.encoded_len(), 4);
    }

    #[test]
    fn rejects_delimiters_in_payload() {
        let f = GsFrame::new(0x01, vec![0x26]);
        assert_eq!(
            encode_gs_frame(&f),
            Err(FramingError::DelimiterInPayload { index: 0, byte: 0x26 })
        );
        assert!(encode_gs_frame(&GsFrame::new(0x01, vec![1, 0x23])).is_err());
        assert!(encode_gs_frame(&GsFrame::new(0x23, vec![1])).is_err());

        // what would have happened: the '&' closes the frame early and the
        // reserved byte is mistaken for payload start
        let raw = [0x23, 0x01, 0x00, 0x26, 0x26];
        let mut d = GsDeframer::new();
        let frames: Vec<_> = push_all(&mut d, &raw).into_iter().filter_map(|e| e.into_frame()).collect();
        assert_eq!(frames, vec![GsFrame::new(0x01, vec![])]);
    }

    #[test]
    fn ampersand_is_a_legal_id() {
        let f = GsFrame::new(GS_END, vec![5]);
        let bytes = encode_gs_frame(&f).unwrap();
        let mut d = GsDeframer::new();
        let last = push_all(&mut d, &bytes).pop().unwrap();
        assert_eq!(last, DeframeEvent::Complete(f));
    }

    #[test]
    fn deframes_example() {
        let mut d = GsDeframer::new();
        let events = push_all(&mut d, &[0x23, 0x01, 0x00, 0xAA, 0xBB, 0x26]);
        assert_eq!(events[0], DeframeEvent::Reset);
        assert!(events[1..5].iter().all(|e| *e == DeframeEvent::Pending));
        assert_eq!(
            events[5],
            DeframeEvent::Complete(GsFrame {
                subsystem_id: 0x01,
                reserved: 0x00,
                payload: vec![0xAA, 0xBB]
            })
        );
        assert_eq!(d.index(), 0);
    }

    #[test]
    fn discards_bytes_before_start() {
        let mut d = GsDeframer::new();
        assert_eq!(d.push(0x41), DeframeEvent::Pending);
        assert_eq!(d.index(), 0);
        assert!(reference_trace(&[0x41, 0x26]).is_empty());
        assert_eq!(d.push(0x26), DeframeEvent::Pending);
    }

    #[test]
    fn start_mid_frame_restarts() {
        let mut d = GsDeframer::new();
        push_all(&mut d, &[0x23, 0x02, 0x00, 0x11]);
        assert_eq!(d.index(), 4);
        assert_eq!(d.push(0x23), DeframeEvent::Reset);
        assert_eq!(d.index(), 1);
        let last = push_all(&mut d, &[0x03, 0x00, 0x99, 0x26]).pop().unwrap();
        assert_eq!(last, DeframeEvent::Complete(GsFrame::new(0x03, vec![0x99])));
    }

    #[test]
    fn short_ampersand_does_not_complete() {
        // '#', id, '&': only index 3, the '&' is taken as the reserved byte
        let mut d = GsDeframer::new();
        let events = push_all(&mut d, &[0x23, 0x01, 0x26]);
        assert!(!events.iter().any(|e| e.is_complete()));
        assert_eq!(d.index(), 3);
    }

    #[test]
    fn overflow_resets() {
        let mut d = GsDeframer::with_cap(8);
        push_all(&mut d, &[0x23, 1, 0, 1, 2, 3, 4, 5]);
        assert_eq!(d.index(), 8);
        assert_eq!(d.push(6), DeframeEvent::Overflow);
        assert_eq!(d.index(), 0);
        // idle again until the next start byte
        assert_eq!(d.push(0x26), DeframeEvent::Pending);
    }

    #[test]
    fn default_cap_is_4096() {
        let mut d = GsDeframer::new();
        d.push(0x23);
        for _ in 0..4095 {
            assert_eq!(d.push(0x00), DeframeEvent::Pending);
        }
        assert_eq!(d.push(0x00), DeframeEvent::Overflow);
    }

    fn payload_strategy() -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(any::<u8>().prop_filter("delimiter", |b| *b != 0x23 && *b != 0x26), 0..300)
    }

    proptest! {
        #[test]
        fn round_trip(id in any::<u8>().prop_filter("start", |b| *b != 0x23),
                      reserved in any::<u8>().prop_filter("start", |b| *b != 0x23),
                      payload in payload_strategy()) {
            let frame = GsFrame { subsystem_id: id, reserved, payload };
            let bytes = encode_gs_frame(&frame).unwrap();
            let mut d = GsDeframer::new();
            let frames: Vec<_> = bytes.iter().filter_map(|&b| d.push(b).into_frame()).collect();
            prop_assert_eq!(frames, vec![frame]);
        }

        #[test]
        fn junk_prefix_resync(junk in prop::collection::vec(any::<u8>().prop_filter("start", |b| *b != 0x23), 0..200),
                              id in 0u8..0x20,
                              payload in payload_strategy()) {
            let frame = GsFrame::new(id, payload);
            let mut stream = junk;
            stream.extend(encode_gs_frame(&frame).unwrap());
            let mut d = GsDeframer::new();
            let frames: Vec<_> = stream.iter().filter_map(|&b| d.push(b).into_frame()).collect();
            prop_assert_eq!(frames.last(), Some(&frame));
            prop_assert_eq!(frames.len(), 1);
        }

        #[test]
        fn agrees_with_reference_on_valid_streams(frames in prop::collection::vec((0u8..0x20, payload_strategy()), 1..8)) {
            let mut stream = Vec::new();
            for (id, payload) in &frames {
                stream.extend(encode_gs_frame(&GsFrame::new(*id, payload.clone())).unwrap());
            }
            let mut d = GsDeframer::new();
            let ours: Vec<_> = stream
                .iter()
                .filter_map(|&b| d.push(b).into_frame())
                .map(|f| (f.subsystem_id, f.payload))
                .collect();
            prop_assert_eq!(ours, reference_trace(&stream));
        }
    }
}
