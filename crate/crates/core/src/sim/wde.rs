//! Wheel drive electronics.
//!
//! Commands arrive as raw bytes (no envelope), delimited by opcode length:
//!
//! | command          | reply                                  |
//! |------------------|----------------------------------------|
//! | `01`             | `01 seq speed_hi speed_lo AC`          |
//! | `02 hi lo`       | `02 00 AC`, wheel speed := `hi lo` rpm |
//! | anything else    | `EE AC`                                |
//!
//! Speed is a big-endian signed rpm value clamped to ±10 000. A reply byte
//! that would equal 0xAC is sent as 0xAB so the terminator stays unique.

use super::Simulator;
use crate::framing::WDE_TERMINATOR;

pub const WDE_CMD_TELEMETRY: u8 = 0x01;
pub const WDE_CMD_SET_SPEED: u8 = 0x02;
pub const WDE_NAK: u8 = 0xEE;
pub const WDE_MAX_RPM: i16 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WdeState {
    pub wheel_speed: i16,
    pub device_id: u8,
    pub telemetry_seq: u8,
}

impl WdeState {
    pub fn new(device_id: u8) -> Self {
        WdeState {
            wheel_speed: 0,
            device_id,
            telemetry_seq: 0,
        }
    }
}

fn saturate(b: u8) -> u8 {
    if b == WDE_TERMINATOR {
        WDE_TERMINATOR - 1
    } else {
        b
    }
}

/// Apply one complete command and produce the reply.
pub fn wde_sim_step(state: &mut WdeState, command: &[u8]) -> Vec<u8> {
    match command {
        [WDE_CMD_TELEMETRY] => {
            let [hi, lo] = state.wheel_speed.to_be_bytes();
            let reply = vec![
                WDE_CMD_TELEMETRY,
                saturate(state.telemetry_seq),
                saturate(hi),
                saturate(lo),
                WDE_TERMINATOR,
            ];
            state.telemetry_seq = state.telemetry_seq.wrapping_add(1);
            reply
        }
        [WDE_CMD_SET_SPEED, hi, lo] => {
            let rpm = i16::from_be_bytes([*hi, *lo]);
            state.wheel_speed = rpm.clamp(-WDE_MAX_RPM, WDE_MAX_RPM);
            vec![WDE_CMD_SET_SPEED, 0x00, WDE_TERMINATOR]
        }
        _ => vec![WDE_NAK, WDE_TERMINATOR],
    }
}

/// Wheel speed carried by a telemetry reply.
pub fn decode_wde_telemetry(reply: &[u8]) -> Option<i16> {
    match reply {
        [WDE_CMD_TELEMETRY, _seq, hi, lo, WDE_TERMINATOR] => Some(i16::from_be_bytes([*hi, *lo])),
        _ => None,
    }
}

/// Bytes a command with this opcode occupies.
fn command_len(opcode: u8) -> usize {
    match opcode {
        WDE_CMD_SET_SPEED => 3,
        _ => 1,
    }
}

/// Stream-driven wheel drive simulator.
#[derive(Debug, Clone)]
pub struct WdeSim {
    pub state: WdeState,
    partial: Vec<u8>,
}

impl WdeSim {
    pub fn new(device_id: u8) -> Self {
        WdeSim {
            state: WdeState::new(device_id),
            partial: Vec::new(),
        }
    }
}

impl Simulator for WdeSim {
    fn on_bytes(&mut self, bytes: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        for &b in bytes {
            self.partial.push(b);
            if self.partial.len() == command_len(self.partial[0]) {
                out.extend(wde_sim_step(&mut self.state, &self.partial));
                self.partial.clear();
            }
        }
        out
    }

    /// A command cut short by a quiet line is rejected.
    fn on_idle(&mut self) -> Vec<u8> {
        if self.partial.is_empty() {
            return Vec::new();
        }
        self.partial.clear();
        vec![WDE_NAK, WDE_TERMINATOR]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framing::{check_wde_reply, WdeDeframer};
    use proptest::prelude::*;

    #[test]
    fn telemetry_at_rest() {
        let mut s = WdeState::new(1);
        assert_eq!(wde_sim_step(&mut s, &[0x01]), vec![0x01, 0x00, 0x00, 0x00, 0xAC]);
        assert_eq!(wde_sim_step(&mut s, &[0x01]), vec![0x01, 0x01, 0x00, 0x00, 0xAC]);
    }

    #[test]
    fn set_speed() {
        let mut s = WdeState::new(1);
        assert_eq!(wde_sim_step(&mut s, &[0x02, 0x01, 0xF4]), vec![0x02, 0x00, 0xAC]);
        assert_eq!(s.wheel_speed, 500);
        let reply = wde_sim_step(&mut s, &[0x01]);
        assert_eq!(decode_wde_telemetry(&reply), Some(500));
    }

    #[test]
    fn negative_and_clamped_speed() {
        let mut s = WdeState::new(1);
        wde_sim_step(&mut s, &(-1200i16).to_be_bytes().iter().fold(vec![0x02], |mut v, b| {
            v.push(*b);
            v
        }));
        assert_eq!(s.wheel_speed, -1200);
        wde_sim_step(&mut s, &[0x02, 0x7F, 0xFF]);
        assert_eq!(s.wheel_speed, 10_000);
    }

    #[test]
    fn unknown_command_naks() {
        let mut s = WdeState::new(1);
        assert_eq!(wde_sim_step(&mut s, &[0x99]), vec![0xEE, 0xAC]);
        assert_eq!(wde_sim_step(&mut s, &[]), vec![0xEE, 0xAC]);
        assert_eq!(wde_sim_step(&mut s, &[0x01, 0x00]), vec![0xEE, 0xAC]);
    }

    #[test]
    fn terminator_bytes_saturate() {
        let mut s = WdeState::new(1);
        s.telemetry_seq = 0xAC;
        wde_sim_step(&mut s, &[0x02, 0x00, 0xAC]);
        assert_eq!(s.wheel_speed, 0xAC);
        let reply = wde_sim_step(&mut s, &[0x01]);
        assert_eq!(reply, vec![0x01, 0xAB, 0x00, 0xAB, 0xAC]);
    }

    #[test]
    fn stream_assembly() {
        let mut sim = WdeSim::new(1);
        let mut out = sim.on_bytes(&[0x02, 0x01]);
        assert!(out.is_empty());
        out.extend(sim.on_bytes(&[0xF4, 0x01, 0x99]));
        assert_eq!(out, vec![0x02, 0x00, 0xAC, 0x01, 0x00, 0x01, 0xF4, 0xAC, 0xEE, 0xAC]);
        sim.on_bytes(&[0x02]);
        assert_eq!(sim.on_idle(), vec![0xEE, 0xAC]);
        assert!(sim.on_idle().is_empty());
    }

    proptest! {
        #[test]
        fn replies_are_single_frames(commands in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..4), 1..50)) {
            let mut s = WdeState::new(1);
            for c in commands {
                let reply = wde_sim_step(&mut s, &c);
                prop_assert!(check_wde_reply(&reply));
                let mut d = WdeDeframer::new();
                let frames: Vec<_> = reply.iter().filter_map(|&b| d.push(b).into_frame()).collect();
                prop_assert_eq!(frames, vec![reply.clone()]);
                prop_assert!(s.wheel_speed.abs() <= WDE_MAX_RPM);
            }
        }
    }
}
