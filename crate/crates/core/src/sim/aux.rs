//! Battery, GPS receiver and custom housekeeping board.
//!
//! Analog values travel as fixed point ×100: voltage unsigned, current and
//! temperature signed, all big-endian.

use super::Simulator;
use crate::framing::{
    xor_checksum, AuxKind, BATTERY_FRAME_LEN, BATTERY_TYPE, CUSTOM_FRAME_LEN, CUSTOM_TYPE,
    WDE_TERMINATOR,
};

pub const BATTERY_VOLTAGE_RANGE: (f64, f64) = (0.0, 35.0);
pub const TEMPERATURE_RANGE: (f64, f64) = (-40.0, 85.0);
pub const CURRENT_RANGE: (f64, f64) = (-300.0, 300.0);

#[derive(Debug, Clone, PartialEq)]
pub struct AuxState {
    pub battery_voltage: f64,
    pub battery_current: f64,
    pub latitude: f64,
    pub longitude: f64,
    pub altitude_m: f64,
    pub fix_quality: u8,
    pub board_temperature: f64,
    pub board_voltage: f64,
    pub board_current: f64,
    pub seq: u8,
}

impl Default for AuxState {
    fn default() -> Self {
        AuxState {
            battery_voltage: 28.0,
            battery_current: 1.5,
            latitude: -6.5231,
            longitude: 106.7542,
            altitude_m: 550.0,
            fix_quality: 1,
            board_temperature: 25.0,
            board_voltage: 5.0,
            board_current: 0.8,
            seq: 0,
        }
    }
}

fn unsigned_fixed(v: f64, range: (f64, f64)) -> [u8; 2] {
    ((v.clamp(range.0, range.1) * 100.0).round() as u16).to_be_bytes()
}

fn signed_fixed(v: f64, range: (f64, f64)) -> [u8; 2] {
    ((v.clamp(range.0, range.1) * 100.0).round() as i16).to_be_bytes()
}

fn finish_binary(mut frame: Vec<u8>) -> Vec<u8> {
    frame.push(xor_checksum(&frame));
    frame.push(WDE_TERMINATOR);
    frame
}

fn nmea_coord(value: f64, pos: char, neg: char, deg_width: usize) -> (String, char) {
    let hemi = if value < 0.0 { neg } else { pos };
    let v = value.abs();
    let deg = v.trunc();
    let minutes = (v - deg) * 60.0;
    (format!("{:0w$}{:07.4}", deg as u32, minutes, w = deg_width), hemi)
}

/// Produce one frame of the requested kind and advance the sequence counter.
pub fn aux_sim_emit(state: &mut AuxState, kind: AuxKind) -> Vec<u8> {
    let seq = state.seq;
    state.seq = state.seq.wrapping_add(1);
    match kind {
        AuxKind::Battery => {
            let mut f = vec![BATTERY_TYPE, seq];
            f.extend(unsigned_fixed(state.battery_voltage, BATTERY_VOLTAGE_RANGE));
            f.extend(signed_fixed(state.battery_current, CURRENT_RANGE));
            finish_binary(f)
        }
        AuxKind::Custom => {
            let mut f = vec![CUSTOM_TYPE, seq];
            f.extend(signed_fixed(state.board_temperature, TEMPERATURE_RANGE));
            f.extend(unsigned_fixed(state.board_voltage, BATTERY_VOLTAGE_RANGE));
            f.extend(signed_fixed(state.board_current, CURRENT_RANGE));
            finish_binary(f)
        }
        AuxKind::Gps => {
            let secs = u32::from(seq);
            let (lat, ns) = nmea_coord(state.latitude, 'N', 'S', 2);
            let (lon, ew) = nmea_coord(state.longitude, 'E', 'W', 3);
            let body = format!(
                "GPGGA,{:02}{:02}{:02}.00,{lat},{ns},{lon},{ew},{},08,0.9,{:.1},M,,,,",
                secs / 3600,
                (secs / 60) % 60,
                secs % 60,
                state.fix_quality,
                state.altitude_m
            );
            let cs = xor_checksum(body.as_bytes());
            format!("${body}*{cs:02X}\n").into_bytes()
        }
    }
}

/// `(voltage V, current A)` from a battery frame.
pub fn decode_battery(frame: &[u8]) -> Option<(f64, f64)> {
    if frame.len() != BATTERY_FRAME_LEN || frame[0] != BATTERY_TYPE {
        return None;
    }
    let v = u16::from_be_bytes([frame[2], frame[3]]);
    let i = i16::from_be_bytes([frame[4], frame[5]]);
    Some((f64::from(v) / 100.0, f64::from(i) / 100.0))
}

/// `(temperature °C, voltage V, current A)` from a housekeeping frame.
pub fn decode_custom(frame: &[u8]) -> Option<(f64, f64, f64)> {
    if frame.len() != CUSTOM_FRAME_LEN || frame[0] != CUSTOM_TYPE {
        return None;
    }
    let t = i16::from_be_bytes([frame[2], frame[3]]);
    let v = u16::from_be_bytes([frame[4], frame[5]]);
    let i = i16::from_be_bytes([frame[6], frame[7]]);
    Some((f64::from(t) / 100.0, f64::from(v) / 100.0, f64::from(i) / 100.0))
}

/// Housekeeping simulator: answers any received byte with one frame and
/// emits one per periodic tick.
#[derive(Debug, Clone)]
pub struct AuxSim {
    pub kind: AuxKind,
    pub state: AuxState,
}

impl AuxSim {
    pub fn new(kind: AuxKind) -> Self {
        AuxSim {
            kind,
            state: AuxState::default(),
        }
    }
}

impl Simulator for AuxSim {
    fn on_bytes(&mut self, bytes: &[u8]) -> Vec<u8> {
        bytes
            .iter()
            .flat_map(|_| aux_sim_emit(&mut self.state, self.kind))
            .collect()
    }

    fn on_tick(&mut self) -> Vec<u8> {
        aux_sim_emit(&mut self.state, self.kind)
    }
}
