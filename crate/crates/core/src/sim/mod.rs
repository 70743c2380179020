//! Protocol-level simulators for every subsystem on the bus, plus the
//! passive hook node that stands in for a loop cable.

mod aux;
mod sts;
mod wde;

use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use thiserror::Error;

pub use aux::{
    aux_sim_emit, decode_battery, decode_custom, AuxSim, AuxState, BATTERY_VOLTAGE_RANGE,
    CURRENT_RANGE, TEMPERATURE_RANGE,
};
pub use sts::{sts_sim_emit, StsSim, StsState};
pub use wde::{
    decode_wde_telemetry, wde_sim_step, WdeSim, WdeState, WDE_CMD_SET_SPEED, WDE_CMD_TELEMETRY,
    WDE_MAX_RPM, WDE_NAK,
};

use crate::framing::AuxKind;
use crate::transport::{Link, LinkReader, LinkWriter, RecvChunk};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("star sensor type {0:#04x} is not in the type table")]
    UnknownStsType(u8),
    #[error("unknown simulator kind `{0}`")]
    UnknownKind(String),
}

/// A subsystem reacting to bytes from the OBDH.
pub trait Simulator {
    /// Bytes received from the OBDH; returns bytes to send back.
    fn on_bytes(&mut self, bytes: &[u8]) -> Vec<u8>;

    /// The line stayed quiet for one inter-character timeout.
    fn on_idle(&mut self) -> Vec<u8> {
        Vec::new()
    }

    /// Unsolicited output in periodic mode.
    fn on_tick(&mut self) -> Vec<u8> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimKind {
    Wde,
    Sts,
    Battery,
    Gps,
    Custom,
    Hook,
}

impl FromStr for SimKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "wde" => SimKind::Wde,
            "sts" => SimKind::Sts,
            "battery" => SimKind::Battery,
            "gps" => SimKind::Gps,
            "custom" => SimKind::Custom,
            "hook" => SimKind::Hook,
            _ => return Err(SimError::UnknownKind(s.to_string())),
        })
    }
}

impl SimKind {
    /// Build the simulator for this kind; `None` for the hook node.
    pub fn build(self, device_id: u8, seed: u64) -> Option<Box<dyn Simulator + Send>> {
        Some(match self {
            SimKind::Wde => Box::new(WdeSim::new(device_id)),
            SimKind::Sts => Box::new(StsSim::new(device_id, seed)),
            SimKind::Battery => Box::new(AuxSim::new(AuxKind::Battery)),
            SimKind::Gps => Box::new(AuxSim::new(AuxKind::Gps)),
            SimKind::Custom => Box::new(AuxSim::new(AuxKind::Custom)),
            SimKind::Hook => return None,
        })
    }
}

#[derive(Debug, Default)]
pub struct ServeOptions<'a> {
    /// Periodic emission rate; `None` means request-driven only.
    pub rate_hz: Option<f64>,
    pub stop: Option<&'a AtomicBool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimExit {
    Eof,
    Stopped,
    LinkClosed,
}

/// Run `sim` against `link` until the peer closes or `stop` is raised.
pub fn serve(sim: &mut dyn Simulator, link: Link, opts: ServeOptions<'_>) -> SimExit {
    let (mut reader, mut writer) = link.split();
    let period = opts
        .rate_hz
        .filter(|r| *r > 0.0)
        .map(|r| Duration::from_secs_f64(1.0 / r));
    if let Some(p) = period {
        let tick = p.min(reader.intercharacter_timeout());
        reader.set_intercharacter_timeout(tick);
    }
    let mut next_tick = period.map(|p| Instant::now() + p);
    let stopped = || opts.stop.is_some_and(|s| s.load(Ordering::SeqCst));

    loop {
        let reply = match reader.recv_chunk() {
            RecvChunk::Data(bytes) => sim.on_bytes(&bytes),
            RecvChunk::Timeout => sim.on_idle(),
            RecvChunk::Eof => return SimExit::Eof,
        };
        if !reply.is_empty() && writer.send_bytes(&reply).is_err() {
            return SimExit::LinkClosed;
        }
        if let (Some(p), Some(due)) = (period, next_tick.as_mut()) {
            let now = Instant::now();
            while *due <= now {
                let out = sim.on_tick();
                if !out.is_empty() && writer.send_bytes(&out).is_err() {
                    return SimExit::LinkClosed;
                }
                *due += p;
            }
        }
        if stopped() {
            return SimExit::Stopped;
        }
    }
}

/// Copy every byte from `input` to `output` unchanged. End-of-stream on the
/// input closes the output. Returns the number of bytes forwarded.
pub fn hook_node_forward(input: LinkReader, output: LinkWriter) -> u64 {
    hook_node_forward_until(input, output, &AtomicBool::new(false))
}

pub fn hook_node_forward_until(mut input: LinkReader, mut output: LinkWriter, stop: &AtomicBool) -> u64 {
    let mut forwarded = 0u64;
    loop {
        match input.recv_chunk() {
            RecvChunk::Data(bytes) => {
                if output.send_bytes(&bytes).is_err() {
                    break;
                }
                forwarded += bytes.len() as u64;
            }
            RecvChunk::Timeout => {}
            RecvChunk::Eof => break,
        }
        if stop.load(Ordering::SeqCst) {
            break;
        }
    }
    output.close();
    forwarded
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{MemHub, PortConfig, RecvEvent};
    use std::thread;

    #[test]
    fn kinds_parse() {
        assert_eq!("wde".parse::<SimKind>().unwrap(), SimKind::Wde);
        assert_eq!("hook".parse::<SimKind>().unwrap(), SimKind::Hook);
        assert!("radio".parse::<SimKind>().is_err());
        assert!(SimKind::Hook.build(0, 0).is_none());
    }

    #[test]
    fn serve_wde_over_link() {
        let hub = MemHub::new();
        let (mut obdh, sim_end) = hub.make_loopback_pair("wde").unwrap();
        let handle = thread::spawn(move || {
            let mut sim = WdeSim::new(1);
            serve(&mut sim, sim_end, ServeOptions::default())
        });
        obdh.send_bytes(&[0x02, 0x01, 0xF4, 0x01]).unwrap();
        let mut got = Vec::new();
        while got.len() < 8 {
            match obdh.recv_byte() {
                RecvEvent::Byte(b) => got.push(b),
                other => panic!("{other:?}"),
            }
        }
        assert_eq!(got, vec![0x02, 0x00, 0xAC, 0x01, 0x00, 0x01, 0xF4, 0xAC]);
        drop(obdh);
        assert_eq!(handle.join().unwrap(), SimExit::Eof);
    }

    #[test]
    fn periodic_emission() {
        let hub = MemHub::new();
        let (mut obdh, sim_end) = hub.make_loopback_pair("bat").unwrap();
        let stop = AtomicBool::new(false);
        thread::scope(|s| {
            s.spawn(|| {
                let mut sim = AuxSim::new(AuxKind::Battery);
                serve(
                    &mut sim,
                    sim_end,
                    ServeOptions {
                        rate_hz: Some(50.0),
                        stop: Some(&stop),
                    },
                )
            });
            let mut n = 0;
            let start = Instant::now();
            while n < 8 * 5 {
                if let RecvEvent::Byte(_) = obdh.recv_byte() {
                    n += 1;
                }
            }
            assert!(start.elapsed() < Duration::from_secs(2));
            stop.store(true, Ordering::SeqCst);
        });
    }

    #[test]
    fn hook_is_identity_and_propagates_close() {
        let hub = MemHub::new();
        let (mut src, hook_in) = hub.make_loopback_pair("in").unwrap();
        let (hook_out, mut dst) = hub.make_loopback_pair("out").unwrap();
        let (in_reader, _in_writer) = hook_in.split();
        let (_out_reader, out_writer) = hook_out.split();
        let h = thread::spawn(move || hook_node_forward(in_reader, out_writer));
        src.send_bytes(&[0x01, 0x02]).unwrap();
        assert_eq!(dst.recv_byte(), RecvEvent::Byte(0x01));
        assert_eq!(dst.recv_byte(), RecvEvent::Byte(0x02));
        drop(src);
        assert_eq!(dst.recv_byte(), RecvEvent::Eof);
        assert_eq!(h.join().unwrap(), 2);
    }

    #[test]
    fn idle_flushes_partial_command() {
        let hub = MemHub::new();
        let fast = PortConfig {
            intercharacter_timeout: Duration::from_millis(30),
            ..PortConfig::default()
        };
        let (mut obdh, sim_end) = hub.make_loopback_pair_with("idle", PortConfig::default(), fast).unwrap();
        let h = thread::spawn(move || serve(&mut WdeSim::new(1), sim_end, ServeOptions::default()));
        obdh.send_bytes(&[0x02]).unwrap();
        assert_eq!(obdh.recv_byte(), RecvEvent::Byte(0xEE));
        assert_eq!(obdh.recv_byte(), RecvEvent::Byte(0xAC));
        drop(obdh);
        h.join().unwrap();
    }
}
