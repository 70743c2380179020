//! Ground-side parser for downlink envelopes `'#' id payload… '&'`.
//!
//! Downlink payloads are subsystem frames passed through verbatim and may
//! contain `'#'` or `'&'`. When the id is known the payload is delimited with
//! that subsystem's own deframer and the `'&'` is only checked as a trailer.
//! Unknown ids fall back to scanning for the first `'&'`.

use std::collections::HashMap;

use super::{DeframeEvent, PayloadDeframer, ProtocolKind, GS_DEFAULT_CAP, GS_END, GS_START};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DownlinkFrame {
    pub subsystem_id: u8,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone)]
enum State {
    Idle,
    Id,
    Typed { id: u8, inner: PayloadDeframer },
    Raw { id: u8, buf: Vec<u8> },
    Trailer { id: u8, payload: Vec<u8> },
}

#[derive(Debug, Clone)]
pub struct DownlinkDeframer {
    protocols: HashMap<u8, ProtocolKind>,
    state: State,
}

impl DownlinkDeframer {
    pub fn new(protocols: HashMap<u8, ProtocolKind>) -> Self {
        DownlinkDeframer {
            protocols,
            state: State::Idle,
        }
    }

    pub fn reset(&mut self) {
        self.state = State::Idle;
    }

    pub fn push(&mut self, byte: u8) -> DeframeEvent<DownlinkFrame> {
        let state = std::mem::replace(&mut self.state, State::Idle);
        let (next, event) = match state {
            State::Idle if byte == GS_START => (State::Id, DeframeEvent::Reset),
            State::Idle => (State::Idle, DeframeEvent::Pending),
            State::Id => {
                let next = match self.protocols.get(&byte) {
                    Some(&kind) => State::Typed {
                        id: byte,
                        inner: PayloadDeframer::for_protocol(kind),
                    },
                    None => State::Raw {
                        id: byte,
                        buf: Vec::new(),
                    },
                };
                (next, DeframeEvent::Pending)
            }
            State::Typed { id, mut inner } => match inner.push(byte) {
                DeframeEvent::Pending | DeframeEvent::Reset => {
                    (State::Typed { id, inner }, DeframeEvent::Pending)
                }
                DeframeEvent::Complete(payload) => {
                    (State::Trailer { id, payload }, DeframeEvent::Pending)
                }
                DeframeEvent::Overflow => (State::Idle, DeframeEvent::Overflow),
                DeframeEvent::Resync => self.restart_or_idle(byte),
            },
            State::Raw { id, mut buf } => {
                if byte == GS_END {
                    let frame = DownlinkFrame {
                        subsystem_id: id,
                        payload: buf,
                    };
                    (State::Idle, DeframeEvent::Complete(frame))
                } else if byte == GS_START {
                    (State::Id, DeframeEvent::Reset)
                } else if buf.len() >= GS_DEFAULT_CAP {
                    (State::Idle, DeframeEvent::Overflow)
                } else {
                    buf.push(byte);
                    (State::Raw { id, buf }, DeframeEvent::Pending)
                }
            }
            State::Trailer { id, payload } => {
                if byte == GS_END {
                    let frame = DownlinkFrame {
                        subsystem_id: id,
                        payload,
                    };
                    (State::Idle, DeframeEvent::Complete(frame))
                } else {
                    self.restart_or_idle(byte)
                }
            }
        };
        self.state = next;
        event
    }

    fn restart_or_idle(&self, byte: u8) -> (State, DeframeEvent<DownlinkFrame>) {
        if byte == GS_START {
            (State::Id, DeframeEvent::Resync)
        } else {
            (State::Idle, DeframeEvent::Resync)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framing::wrap_downlink;

    fn deframer() -> DownlinkDeframer {
        DownlinkDeframer::new(HashMap::from([
            (0x01, ProtocolKind::Wde),
            (0x04, ProtocolKind::Sts),
        ]))
    }

    fn frames(d: &mut DownlinkDeframer, bytes: &[u8]) -> Vec<DownlinkFrame> {
        bytes.iter().filter_map(|&b| d.push(b).into_frame()).collect()
    }

    #[test]
    fn wde_payload_with_delimiters() {
        let reply = [0x01, 0x23, 0x26, 0x00, 0xAC];
        let mut d = deframer();
        assert_eq!(
            frames(&mut d, &wrap_downlink(0x01, &reply)),
            vec![DownlinkFrame {
                subsystem_id: 0x01,
                payload: reply.to_vec()
            }]
        );
    }

    #[test]
    fn sts_payload_by_length() {
        let mut frame = vec![0x01];
        frame.extend([0x26; 15]);
        let mut d = deframer();
        let mut stream = vec![0x55, 0x26];
        stream.extend(wrap_downlink(0x04, &frame));
        stream.extend(wrap_downlink(0x01, &[0x02, 0x00, 0xAC]));
        let got = frames(&mut d, &stream);
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].payload, frame);
        assert_eq!(got[1].payload, vec![0x02, 0x00, 0xAC]);
    }

    #[test]
    fn unknown_id_scans_for_end() {
        let mut d = deframer();
        let got = frames(&mut d, &wrap_downlink(0x00, b"frames=3"));
        assert_eq!(got[0].subsystem_id, 0x00);
        assert_eq!(got[0].payload, b"frames=3");
    }

    #[test]
    fn missing_trailer_resyncs() {
        let mut d = deframer();
        let mut stream = vec![0x23, 0x01, 0x10, 0xAC];
        stream.extend(wrap_downlink(0x01, &[0x11, 0xAC]));
        let events: Vec<_> = stream.iter().map(|&b| d.push(b)).collect();
        assert_eq!(events[4], DeframeEvent::Resync);
        let got: Vec<_> = events.into_iter().filter_map(|e| e.into_frame()).collect();
        assert_eq!(got, vec![DownlinkFrame { subsystem_id: 1, payload: vec![0x11, 0xAC] }]);
    }
}
