//! Uplink routing, downlink wrapping and the per-port receive tasks.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;

use super::{
    Disposition, PortTable, SubsystemKind, TelemetryFilter, TelemetryRecord, TelemetryStore,
    INTERNAL_ID,
};
use crate::framing::{wrap_downlink, DeframeEvent, GsDeframer, GsFrame, PayloadDeframer};
use crate::transport::{LinkReader, LinkWriter, RecvChunk};

/// Internal request: status counters as ASCII text.
pub const CMD_STATUS: u8 = 0x01;
/// Internal request `[0x02, id, n]`: downlink the newest `n` stored records
/// of subsystem `id` (all of them when `n` is 0).
pub const CMD_REPLAY: u8 = 0x02;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Destination {
    Port(String),
    Internal,
    Unknown,
}

pub fn route_uplink(frame: &GsFrame, table: &PortTable) -> Destination {
    if frame.subsystem_id == INTERNAL_ID {
        return Destination::Internal;
    }
    match table.by_id(frame.subsystem_id) {
        Some(row) => Destination::Port(row.port_name.clone()),
        None => Destination::Unknown,
    }
}

/// `<iso-time> <port> <event> <hex-bytes≤32>`
pub fn frame_log_line(time: chrono::DateTime<Utc>, port: &str, event: &str, bytes: &[u8]) -> String {
    let shown = &bytes[..bytes.len().min(32)];
    format!(
        "{} {} {} {}",
        time.to_rfc3339_opts(SecondsFormat::Millis, true),
        port,
        event,
        hex::encode(shown)
    )
    .trim_end()
    .to_string()
}

fn log_frame(port: &str, event: &str, bytes: &[u8]) {
    if log::log_enabled!(target: "obdh::frame", log::Level::Info) {
        log::info!(target: "obdh::frame", "{}", frame_log_line(Utc::now(), port, event, bytes));
    }
}

#[derive(Debug, Default)]
pub struct Counters {
    uplink_frames: AtomicU64,
    routed: AtomicU64,
    dropped: AtomicU64,
    internal: AtomicU64,
    downlinks: AtomicU64,
    stored: AtomicU64,
    resyncs: AtomicU64,
    overflows: AtomicU64,
    write_errors: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CounterSnapshot {
    pub uplink_frames: u64,
    pub routed: u64,
    pub dropped: u64,
    pub internal: u64,
    pub downlinks: u64,
    pub stored: u64,
    pub resyncs: u64,
    pub overflows: u64,
    pub write_errors: u64,
}

impl Counters {
    fn bump(counter: &AtomicU64) {
        counter.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> CounterSnapshot {
        let get = |c: &AtomicU64| c.load(Ordering::Relaxed);
        CounterSnapshot {
            uplink_frames: get(&self.uplink_frames),
            routed: get(&self.routed),
            dropped: get(&self.dropped),
            internal: get(&self.internal),
            downlinks: get(&self.downlinks),
            stored: get(&self.stored),
            resyncs: get(&self.resyncs),
            overflows: get(&self.overflows),
            write_errors: get(&self.write_errors),
        }
    }
}

impl CounterSnapshot {
    pub fn status_text(&self) -> String {
        format!(
            "uplink={} routed={} dropped={} internal={} downlink={} stored={} resync={} overflow={} write_err={}",
            self.uplink_frames,
            self.routed,
            self.dropped,
            self.internal,
            self.downlinks,
            self.stored,
            self.resyncs,
            self.overflows,
            self.write_errors
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitReason {
    Eof,
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskExit {
    pub port: String,
    pub reason: ExitReason,
}

type SharedWriter = Arc<Mutex<LinkWriter>>;

/// Shared state of a running node.
///
/// Every output link sits behind its own mutex and every frame is written
/// with a single `send_bytes` while holding it, so envelopes from different
/// tasks never interleave.
pub struct Router {
    table: PortTable,
    writers: Mutex<HashMap<String, SharedWriter>>,
    telemetry: Mutex<TelemetryStore>,
    counters: Counters,
    stop: AtomicBool,
}

impl Router {
    pub fn new(table: PortTable, telemetry_cap: usize) -> Self {
        Router {
            table,
            writers: Mutex::new(HashMap::new()),
            telemetry: Mutex::new(TelemetryStore::new(telemetry_cap)),
            counters: Counters::default(),
            stop: AtomicBool::new(false),
        }
    }

    pub fn table(&self) -> &PortTable {
        &self.table
    }

    pub fn attach_writer(&self, port: &str, writer: LinkWriter) {
        self.writers
            .lock()
            .unwrap()
            .insert(port.to_string(), Arc::new(Mutex::new(writer)));
    }

    fn writer(&self, port: &str) -> Option<SharedWriter> {
        self.writers.lock().unwrap().get(port).cloned()
    }

    pub fn counters(&self) -> CounterSnapshot {
        self.counters.snapshot()
    }

    pub fn request_stop(&self) {
        self.stop.store(true, Ordering::SeqCst);
    }

    pub fn stop_requested(&self) -> bool {
        self.stop.load(Ordering::SeqCst)
    }

    fn telemetry(&self) -> MutexGuard<'_, TelemetryStore> {
        self.telemetry.lock().unwrap()
    }

    pub fn store_telemetry(&self, rec: TelemetryRecord) {
        if self.telemetry().append(rec) {
            Counters::bump(&self.counters.stored);
        }
    }

    pub fn query_telemetry(&self, filter: &TelemetryFilter) -> Vec<TelemetryRecord> {
        self.telemetry().query(filter)
    }

    pub fn telemetry_len(&self) -> usize {
        self.telemetry().len()
    }

    /// Write `bytes` to `port` as one unit.
    fn send(&self, port: &str, bytes: &[u8]) -> bool {
        let Some(writer) = self.writer(port) else {
            Counters::bump(&self.counters.write_errors);
            log::warn!("{port}: no link attached");
            return false;
        };
        let result = writer.lock().unwrap().send_bytes(bytes);
        match result {
            Ok(_) => true,
            Err(e) => {
                Counters::bump(&self.counters.write_errors);
                log::warn!("{port}: write failed: {e}");
                false
            }
        }
    }

    fn downlink(&self, subsystem_id: u8, payload: &[u8]) {
        let envelope = wrap_downlink(subsystem_id, payload);
        let ground = &self.table.ground_port().port_name;
        if self.send(ground, &envelope) {
            Counters::bump(&self.counters.downlinks);
            log_frame(ground, "downlink", &envelope);
        }
    }

    /// Act on one complete uplink frame.
    pub fn handle_uplink(&self, frame: GsFrame) -> Destination {
        Counters::bump(&self.counters.uplink_frames);
        let ground = &self.table.ground_port().port_name;
        log_frame(ground, "uplink", &frame.payload);
        let dest = route_uplink(&frame, &self.table);
        match &dest {
            Destination::Port(port) => {
                log_frame(port, "route", &frame.payload);
                if self.send(port, &frame.payload) {
                    Counters::bump(&self.counters.routed);
                }
            }
            Destination::Internal => {
                Counters::bump(&self.counters.internal);
                self.answer_internal(&frame.payload);
            }
            Destination::Unknown => {
                Counters::bump(&self.counters.dropped);
                log_frame(ground, "drop", &[frame.subsystem_id]);
            }
        }
        dest
    }

    fn answer_internal(&self, request: &[u8]) {
        match request {
            [CMD_REPLAY, id, n, ..] => {
                let Some(row) = self.table.by_id(*id) else {
                    self.downlink(INTERNAL_ID, b"unknown subsystem");
                    return;
                };
                let mut filter = TelemetryFilter::port(row.port_name.clone());
                if *n > 0 {
                    filter.limit = Some(usize::from(*n));
                }
                for rec in self.query_telemetry(&filter) {
                    self.downlink(*id, &rec.payload);
                }
            }
            [CMD_STATUS, ..] | [] => {
                let text = self.counters().status_text();
                self.downlink(INTERNAL_ID, text.as_bytes());
            }
            _ => self.downlink(INTERNAL_ID, b"unknown request"),
        }
    }

    /// Store a subsystem frame and downlink it if the port's policy says so.
    pub fn handle_subsystem_frame(&self, port: &str, payload: Vec<u8>) {
        let Some(row) = self.table.row(port) else {
            return;
        };
        log_frame(port, "frame", &payload);
        if row.disposition == Disposition::ForwardedToGs {
            self.downlink(row.subsystem_id, &payload);
        }
        self.store_telemetry(TelemetryRecord {
            timestamp: Instant::now(),
            source_port: port.to_string(),
            payload,
            disposition: row.disposition,
        });
    }

    fn count_event<T>(&self, port: &str, event: &DeframeEvent<T>) {
        match event {
            DeframeEvent::Resync => {
                Counters::bump(&self.counters.resyncs);
                log_frame(port, "resync", &[]);
            }
            DeframeEvent::Overflow => {
                Counters::bump(&self.counters.overflows);
                log_frame(port, "overflow", &[]);
            }
            _ => {}
        }
    }
}

/// Drive `reader` until end-of-stream or a stop request, handing every
/// received chunk to `on_bytes`.
fn pump(
    router: &Router,
    port: &str,
    mut reader: LinkReader,
    mut on_bytes: impl FnMut(&[u8]),
) -> TaskExit {
    loop {
        match reader.recv_chunk() {
            RecvChunk::Data(bytes) => on_bytes(&bytes),
            RecvChunk::Timeout => {
                if router.stop_requested() {
                    return TaskExit {
                        port: port.to_string(),
                        reason: ExitReason::Stopped,
                    };
                }
            }
            RecvChunk::Eof => {
                log_frame(port, "eof", &[]);
                return TaskExit {
                    port: port.to_string(),
                    reason: ExitReason::Eof,
                };
            }
        }
        if router.stop_requested() {
            return TaskExit {
                port: port.to_string(),
                reason: ExitReason::Stopped,
            };
        }
    }
}

/// Receive task for the ground-segment port.
pub fn run_gs_task(router: &Router, reader: LinkReader) -> TaskExit {
    let port = router.table().ground_port().port_name.clone();
    let mut deframer = GsDeframer::new();
    pump(router, &port, reader, |bytes| {
        for &b in bytes {
            let event = deframer.push(b);
            router.count_event(&port, &event);
            if let DeframeEvent::Complete(frame) = event {
                router.handle_uplink(frame);
            }
        }
    })
}

/// Receive task for one subsystem port.
pub fn run_subsystem_task(router: &Router, port: &str, reader: LinkReader) -> TaskExit {
    let protocol = router
        .table()
        .row(port)
        .and_then(|r| r.subsystem.protocol())
        .unwrap_or_else(|| panic!("{port} is not a subsystem port"));
    let mut deframer = PayloadDeframer::for_protocol(protocol);
    pump(router, port, reader, |bytes| {
        for &b in bytes {
            let event = deframer.push(b);
            router.count_event(port, &event);
            if let DeframeEvent::Complete(payload) = event {
                router.handle_subsystem_frame(port, payload);
            }
        }
    })
}

/// Raw forwarding used while ports are wired into a close loop.
pub fn run_forward_task(router: &Router, rx_port: &str, reader: LinkReader, tx_port: &str) -> TaskExit {
    pump(router, rx_port, reader, |bytes| {
        router.send(tx_port, bytes);
    })
}

pub(crate) fn is_ground(router: &Router, port: &str) -> bool {
    router
        .table()
        .row(port)
        .is_some_and(|r| r.subsystem == SubsystemKind::Egse)
}
