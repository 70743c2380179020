//! Close-loop soak: pump numbered, seeded frames into the ingress port and
//! check each one comes back byte-exact on the egress port.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{HarnessError, LoopTopology};
use crate::node::{Node, NodeOptions, PortTable};
use crate::sim::hook_node_forward_until;
use crate::transport::{Link, LinkReader, MemHub, PortConfig, RecvChunk};

const SEQ_LEN: usize = 4;
static RUN_ID: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone)]
pub struct LoopConfig {
    pub topology: LoopTopology,
    pub duration: Duration,
    /// Frames per second.
    pub rate: f64,
    pub payload_len: usize,
    pub seed: u64,
    /// Leave this cable (index into `topology.cables`) unplugged.
    pub disconnect_cable: Option<usize>,
    /// How long the egress may stay silent after the last frame was sent.
    pub drain_timeout: Duration,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            topology: LoopTopology::default(),
            duration: Duration::from_secs(60),
            rate: 100.0,
            payload_len: 64,
            seed: 1,
            disconnect_cable: None,
            drain_timeout: Duration::from_secs(2),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LatencyStats {
    pub min_ms: f64,
    pub mean_ms: f64,
    pub max_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopReport {
    pub frames_sent: u64,
    pub frames_received: u64,
    pub corrupt: u64,
    pub lost: u64,
    pub duration_s: f64,
    pub latency: LatencyStats,
}

impl LoopReport {
    pub fn passed(&self) -> bool {
        self.corrupt == 0 && self.lost == 0 && self.frames_sent > 0
    }

    /// Counters only; equal across identical runs on a lossless transport.
    pub fn counters(&self) -> (u64, u64, u64, u64) {
        (self.frames_sent, self.frames_received, self.corrupt, self.lost)
    }

    pub fn summary_line(&self) -> String {
        let mut value = serde_json::to_value(self).expect("report serializes");
        value["test"] = "closeloop".into();
        value["pass"] = self.passed().into();
        value.to_string()
    }
}

impl fmt::Display for LoopReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "close-loop report")?;
        writeln!(f, "  frames sent      {}", self.frames_sent)?;
        writeln!(f, "  frames received  {}", self.frames_received)?;
        writeln!(f, "  corrupt          {}", self.corrupt)?;
        writeln!(f, "  lost             {}", self.lost)?;
        writeln!(f, "  duration         {:.1} s", self.duration_s)?;
        writeln!(
            f,
            "  latency ms       min {:.3} / mean {:.3} / max {:.3}",
            self.latency.min_ms, self.latency.mean_ms, self.latency.max_ms
        )?;
        write!(f, "  result           {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// The bytes frame `seq` must carry: big-endian sequence number followed by
/// `payload_len` bytes drawn from a generator keyed by `(seed, seq)`.
pub fn loop_frame(seed: u64, seq: u32, payload_len: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(seq));
    let mut frame = vec![0u8; SEQ_LEN + payload_len];
    frame[..SEQ_LEN].copy_from_slice(&seq.to_be_bytes());
    rng.fill_bytes(&mut frame[SEQ_LEN..]);
    frame
}

pub fn run_close_loop(
    topology: LoopTopology,
    duration: Duration,
    rate: f64,
    payload_len: usize,
    seed: u64,
) -> Result<LoopReport, HarnessError> {
    run_close_loop_with(&LoopConfig {
        topology,
        duration,
        rate,
        payload_len,
        seed,
        ..LoopConfig::default()
    })
}

pub fn run_close_loop_with(cfg: &LoopConfig) -> Result<LoopReport, HarnessError> {
    if !(cfg.rate > 0.0 && cfg.rate.is_finite()) {
        return Err(HarnessError::InvalidRate(cfg.rate));
    }
    cfg.topology.walk()?;
    let table = PortTable::default();
    for port in cfg.topology.ports() {
        if table.row(&port).is_none() {
            return Err(HarnessError::Topology(format!("{port} is not an OBDH port")));
        }
    }

    // one in-memory pair per port: near end to the node, far end to the bench
    let hub = MemHub::new();
    let run = RUN_ID.fetch_add(1, Ordering::Relaxed);
    let mut node_links = Vec::new();
    let mut far: HashMap<String, Link> = HashMap::new();
    for port in cfg.topology.ports() {
        let (near, far_end) = hub.make_loopback_pair_with(
            &format!("loop{run}/{port}"),
            PortConfig {
                intercharacter_timeout: Duration::from_millis(100),
                ..PortConfig::named(port.clone())
            },
            PortConfig {
                intercharacter_timeout: Duration::from_millis(100),
                ..PortConfig::named(format!("{port}-far"))
            },
        )?;
        node_links.push((port.clone(), near));
        far.insert(port, far_end);
    }
    let node = Node::start(
        table,
        node_links,
        NodeOptions {
            forwards: cfg.topology.internal_forwards.clone(),
            ..NodeOptions::default()
        },
    )?;

    let mut far_readers: HashMap<String, LinkReader> = HashMap::new();
    let mut far_writers = HashMap::new();
    for (port, link) in far {
        let (r, w) = link.split();
        far_readers.insert(port.clone(), r);
        far_writers.insert(port, w);
    }

    let stop = Arc::new(AtomicBool::new(false));
    let mut hooks = Vec::new();
    let mut unplugged = Vec::new();
    for (i, (tx, rx)) in cfg.topology.cables.iter().enumerate() {
        let reader = far_readers.remove(tx).expect("cable tx port has a far end");
        let writer = far_writers.remove(rx).expect("cable rx port has a far end");
        if cfg.disconnect_cable == Some(i) {
            unplugged.push((reader, writer));
            continue;
        }
        let stop = stop.clone();
        hooks.push(thread::spawn(move || hook_node_forward_until(reader, writer, &stop)));
    }
    let mut ingress = far_writers
        .remove(&cfg.topology.ingress)
        .ok_or_else(|| HarnessError::Topology("ingress port is also a cable target".into()))?;
    let mut egress = far_readers
        .remove(&cfg.topology.egress)
        .ok_or_else(|| HarnessError::Topology("egress port is also a cable source".into()))?;

    let total = (cfg.duration.as_secs_f64() * cfg.rate).round() as u64;
    let period = Duration::from_secs_f64(1.0 / cfg.rate);
    let record_len = SEQ_LEN + cfg.payload_len;
    let sent_at: Arc<Mutex<Vec<Instant>>> = Arc::new(Mutex::new(Vec::with_capacity(total as usize)));
    let sending_done = Arc::new(AtomicBool::new(false));
    let started = Instant::now();

    let pump = {
        let sent_at = sent_at.clone();
        let sending_done = sending_done.clone();
        let (seed, payload_len) = (cfg.seed, cfg.payload_len);
        thread::spawn(move || {
            let mut sent = 0u64;
            for k in 0..total {
                let due = started + period.mul_f64(k as f64);
                let now = Instant::now();
                if due > now {
                    thread::sleep(due - now);
                }
                let frame = loop_frame(seed, k as u32, payload_len);
                sent_at.lock().unwrap().push(Instant::now());
                if ingress.send_bytes(&frame).is_err() {
                    break;
                }
                sent += 1;
            }
            sending_done.store(true, Ordering::SeqCst);
            (sent, ingress)
        })
    };

    let mut received = 0u64;
    let mut corrupt = 0u64;
    let mut latencies = Vec::with_capacity(total as usize);
    let mut buf: Vec<u8> = Vec::new();
    let mut quiet_since: Option<Instant> = None;
    while received < total {
        match egress.recv_chunk() {
            RecvChunk::Data(bytes) => {
                quiet_since = None;
                buf.extend(bytes);
                let arrived = Instant::now();
                let whole = buf.len() / record_len * record_len;
                for record in buf[..whole].chunks(record_len) {
                    let seq = received as u32;
                    if record != loop_frame(cfg.seed, seq, cfg.payload_len).as_slice() {
                        corrupt += 1;
                    }
                    if let Some(t) = sent_at.lock().unwrap().get(received as usize) {
                        latencies.push(arrived.saturating_duration_since(*t).as_secs_f64() * 1e3);
                    }
                    received += 1;
                }
                buf.drain(..whole);
            }
            RecvChunk::Timeout => {
                if sending_done.load(Ordering::SeqCst) {
                    let since = *quiet_since.get_or_insert_with(Instant::now);
                    if since.elapsed() >= cfg.drain_timeout {
                        break;
                    }
                }
            }
            RecvChunk::Eof => break,
        }
    }
    let (frames_sent, ingress) = pump.join().expect("pump thread");
    let elapsed = started.elapsed();

    stop.store(true, Ordering::SeqCst);
    drop(ingress);
    drop(unplugged);
    node.shutdown();
    for h in hooks {
        let _ = h.join();
    }

    let latency = if latencies.is_empty() {
        LatencyStats::default()
    } else {
        LatencyStats {
            min_ms: latencies.iter().copied().fold(f64::INFINITY, f64::min),
            mean_ms: latencies.iter().sum::<f64>() / latencies.len() as f64,
            max_ms: latencies.iter().copied().fold(0.0, f64::max),
        }
    };
    let received = received.min(frames_sent);
    Ok(LoopReport {
        frames_sent,
        frames_received: received,
        corrupt: corrupt.min(received),
        lost: frames_sent - received,
        duration_s: elapsed.as_secs_f64(),
        latency,
    })
}
