//! Byte-stream links between the OBDH and its subsystems.
//!
//! A [`Link`] is a duplex byte pipe with the classic serial-port read
//! contract: a read blocks until at least `min_read_bytes` are available or
//! until `intercharacter_timeout` passes without a new byte. Three backends
//! are provided:
//!
//! ```text
//! mem:<name>              in-process pair, see MemHub
//! tcp:<host>:<port>       connect to a listening peer
//! tcp-listen:<host>:<port> accept exactly one peer
//! pty:<path>              serial or pseudo-terminal device (unix)
//! ```
//!
//! No framing is added by any backend; bytes are delivered verbatim and in
//! order.

mod mem;
#[cfg(unix)]
mod pty;
mod tcp;

use std::collections::VecDeque;
use std::fmt;
use std::io;
use std::str::FromStr;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mem::MemHub;

/// Default line rate, symbols per second.
pub const DEFAULT_BAUD: u32 = 9600;
/// Default minimum bytes per read.
pub const DEFAULT_MIN_READ_BYTES: usize = 1;
/// Default inter-character timeout.
pub const DEFAULT_INTERCHARACTER_TIMEOUT: Duration = Duration::from_millis(500);

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("unknown backend `{0}`")]
    UnknownBackend(String),
    #[error("unknown endpoint `{0}`")]
    UnknownEndpoint(String),
    #[error("duplicate endpoint `{0}`")]
    Duplicate(String),
    #[error("endpoint `{0}` has no free end")]
    EndpointInUse(String),
    #[error("address unreachable: {addr}: {source}")]
    Unreachable { addr: String, source: io::Error },
    #[error("device not present: {0}")]
    DeviceNotPresent(String),
    #[error("invalid port config: {0}")]
    InvalidConfig(String),
    #[error("link closed")]
    Closed,
    #[error("backend i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Electrical standard of a port. Carried as a label only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElectricalStandard {
    #[serde(rename = "RS232", alias = "rs232")]
    Rs232,
    #[serde(rename = "RS422", alias = "rs422")]
    Rs422,
    #[serde(rename = "TTL", alias = "ttl")]
    Ttl,
}

impl fmt::Display for ElectricalStandard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElectricalStandard::Rs232 => "RS232",
            ElectricalStandard::Rs422 => "RS422",
            ElectricalStandard::Ttl => "TTL",
        })
    }
}

/// Port read/line settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PortConfig {
    pub port_name: String,
    /// Applied to real serial devices; virtual links only use it when
    /// `pacing` is set.
    pub baud: u32,
    pub min_read_bytes: usize,
    pub intercharacter_timeout: Duration,
    pub electrical_standard: ElectricalStandard,
    /// Throttle writes to `baud / 10` bytes per second.
    pub pacing: bool,
    /// How long `tcp:` keeps retrying a refused connection.
    pub connect_wait: Duration,
}

impl Default for PortConfig {
    fn default() -> Self {
        PortConfig {
            port_name: String::new(),
            baud: DEFAULT_BAUD,
            min_read_bytes: DEFAULT_MIN_READ_BYTES,
            intercharacter_timeout: DEFAULT_INTERCHARACTER_TIMEOUT,
            electrical_standard: ElectricalStandard::Rs232,
            pacing: false,
            connect_wait: Duration::ZERO,
        }
    }
}

impl PortConfig {
    pub fn named(port_name: impl Into<String>) -> Self {
        PortConfig {
            port_name: port_name.into(),
            ..PortConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), LinkError> {
        if self.min_read_bytes == 0 {
            return Err(LinkError::InvalidConfig("min_read_bytes must be >= 1".into()));
        }
        if self.intercharacter_timeout.is_zero() {
            return Err(LinkError::InvalidConfig(
                "intercharacter_timeout must be > 0".into(),
            ));
        }
        if self.baud == 0 {
            return Err(LinkError::InvalidConfig("baud must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    InMemory,
    Tcp,
    PseudoTerminal,
}

/// Parsed form of a backend string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Memory(String),
    TcpConnect(String),
    TcpListen(String),
    Device(String),
}

impl FromStr for BackendSpec {
    type Err = LinkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (scheme, rest) = s
            .split_once(':')
            .ok_or_else(|| LinkError::UnknownBackend(s.to_string()))?;
        if rest.is_empty() {
            return Err(LinkError::UnknownBackend(s.to_string()));
        }
        match scheme {
            "mem" => Ok(BackendSpec::Memory(rest.to_string())),
            "tcp" => Ok(BackendSpec::TcpConnect(rest.to_string())),
            "tcp-listen" => Ok(BackendSpec::TcpListen(rest.to_string())),
            "pty" => Ok(BackendSpec::Device(rest.to_string())),
            _ => Err(LinkError::UnknownBackend(s.to_string())),
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Memory(n) => write!(f, "mem:{n}"),
            BackendSpec::TcpConnect(a) => write!(f, "tcp:{a}"),
            BackendSpec::TcpListen(a) => write!(f, "tcp-listen:{a}"),
            BackendSpec::Device(p) => write!(f, "pty:{p}"),
        }
    }
}

/// Result of one blocking read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecvEvent {
    Byte(u8),
    Timeout,
    Eof,
}

/// Like [`RecvEvent`] but hands back everything buffered at once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecvChunk {
    Data(Vec<u8>),
    Timeout,
    Eof,
}

pub(crate) enum Fill {
    Data(usize),
    TimedOut,
    Eof,
}

pub(crate) trait ByteSource: Send {
    /// Wait up to `timeout` for bytes and copy whatever is available.
    fn fill(&mut self, buf: &mut [u8], timeout: Duration) -> io::Result<Fill>;
}

pub(crate) trait ByteSink: Send {
    fn write_all(&mut self, data: &[u8]) -> Result<(), LinkError>;
    fn close(&mut self);
}

/// Receiving half of a [`Link`].
pub struct LinkReader {
    source: Box<dyn ByteSource>,
    pending: VecDeque<u8>,
    min_read_bytes: usize,
    timeout: Duration,
    eof: bool,
    scratch: Vec<u8>,
}

impl LinkReader {
    pub(crate) fn new(source: Box<dyn ByteSource>, config: &PortConfig) -> Self {
        LinkReader {
            source,
            pending: VecDeque::new(),
            min_read_bytes: config.min_read_bytes,
            timeout: config.intercharacter_timeout,
            eof: false,
            scratch: vec![0; 4096],
        }
    }

    pub fn intercharacter_timeout(&self) -> Duration {
        self.timeout
    }

    /// Change the inter-character timeout, e.g. for a poll loop that needs a
    /// shorter tick than the port default.
    pub fn set_intercharacter_timeout(&mut self, timeout: Duration) {
        if !timeout.is_zero() {
            self.timeout = timeout;
        }
    }

    /// Returns `false` on timeout or end-of-stream with nothing buffered.
    fn refill(&mut self) -> Option<bool> {
        if !self.pending.is_empty() {
            return Some(true);
        }
        if self.eof {
            return Some(false);
        }
        loop {
            match self.source.fill(&mut self.scratch, self.timeout) {
                Ok(Fill::Data(n)) => {
                    self.pending.extend(&self.scratch[..n]);
                    if self.pending.len() >= self.min_read_bytes {
                        return Some(true);
                    }
                }
                Ok(Fill::TimedOut) => {
                    // inter-character gap: hand out whatever arrived so far
                    return if self.pending.is_empty() { None } else { Some(true) };
                }
                Ok(Fill::Eof) | Err(_) => {
                    self.eof = true;
                    return Some(!self.pending.is_empty());
                }
            }
        }
    }

    pub fn recv_byte(&mut self) -> RecvEvent {
        match self.refill() {
            Some(true) => RecvEvent::Byte(self.pending.pop_front().expect("refilled")),
            Some(false) => RecvEvent::Eof,
            None => RecvEvent::Timeout,
        }
    }

    pub fn recv_chunk(&mut self) -> RecvChunk {
        match self.refill() {
            Some(true) => RecvChunk::Data(self.pending.drain(..).collect()),
            Some(false) => RecvChunk::Eof,
            None => RecvChunk::Timeout,
        }
    }
}

/// Sending half of a [`Link`].
pub struct LinkWriter {
    sink: Box<dyn ByteSink>,
    closed: bool,
    bytes_per_sec: Option<f64>,
}

impl LinkWriter {
    pub(crate) fn new(sink: Box<dyn ByteSink>, config: &PortConfig) -> Self {
        LinkWriter {
            sink,
            closed: false,
            bytes_per_sec: config.pacing.then(|| f64::from(config.baud) / 10.0),
        }
    }

    pub fn send_bytes(&mut self, data: &[u8]) -> Result<usize, LinkError> {
        if self.closed {
            return Err(LinkError::Closed);
        }
        if data.is_empty() {
            return Ok(0);
        }
        self.sink.write_all(data)?;
        if let Some(rate) = self.bytes_per_sec {
            thread::sleep(Duration::from_secs_f64(data.len() as f64 / rate));
        }
        Ok(data.len())
    }

    pub fn close(&mut self) {
        if !self.closed {
            self.closed = true;
            self.sink.close();
        }
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }
}

impl Drop for LinkWriter {
    fn drop(&mut self) {
        self.close();
    }
}

/// A configured duplex byte link.
pub struct Link {
    config: PortConfig,
    backend: Backend,
    reader: LinkReader,
    writer: LinkWriter,
}

impl Link {
    pub(crate) fn from_parts(
        config: PortConfig,
        backend: Backend,
        source: Box<dyn ByteSource>,
        sink: Box<dyn ByteSink>,
    ) -> Self {
        let reader = LinkReader::new(source, &config);
        let writer = LinkWriter::new(sink, &config);
        Link {
            config,
            backend,
            reader,
            writer,
        }
    }

    pub fn config(&self) -> &PortConfig {
        &self.config
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn send_bytes(&mut self, data: &[u8]) -> Result<usize, LinkError> {
        self.writer.send_bytes(data)
    }

    pub fn recv_byte(&mut self) -> RecvEvent {
        self.reader.recv_byte()
    }

    pub fn recv_chunk(&mut self) -> RecvChunk {
        self.reader.recv_chunk()
    }

    pub fn set_intercharacter_timeout(&mut self, timeout: Duration) {
        self.reader.set_intercharacter_timeout(timeout);
    }

    /// Close the sending direction; the peer sees end-of-stream.
    pub fn close(&mut self) {
        self.writer.close();
    }

    pub fn split(self) -> (LinkReader, LinkWriter) {
        (self.reader, self.writer)
    }
}

impl fmt::Debug for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Link")
            .field("port", &self.config.port_name)
            .field("backend", &self.backend)
            .finish()
    }
}

/// Open a link, resolving `mem:` names against the process-wide hub.
pub fn open_link(config: PortConfig, backend_spec: &str) -> Result<Link, LinkError> {
    open_link_in(MemHub::global(), config, backend_spec)
}

pub fn open_link_in(hub: &MemHub, config: PortConfig, backend_spec: &str) -> Result<Link, LinkError> {
    config.validate()?;
    match backend_spec.parse::<BackendSpec>()? {
        BackendSpec::Memory(name) => hub.open(config, &name),
        BackendSpec::TcpConnect(addr) => tcp::connect(config, &addr),
        BackendSpec::TcpListen(addr) => tcp::listen_one(config, &addr),
        #[cfg(unix)]
        BackendSpec::Device(path) => pty::open(config, &path),
        #[cfg(not(unix))]
        BackendSpec::Device(path) => Err(LinkError::DeviceNotPresent(path)),
    }
}

/// Create a connected in-memory pair on the process-wide hub.
pub fn make_loopback_pair(name: &str) -> Result<(Link, Link), LinkError> {
    MemHub::global().make_loopback_pair(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Instant;

    #[test]
    fn parses_backend_specs() {
        assert_eq!(
            "mem:pairA".parse::<BackendSpec>().unwrap(),
            BackendSpec::Memory("pairA".into())
        );
        assert_eq!(
            "tcp:127.0.0.1:7001".parse::<BackendSpec>().unwrap(),
            BackendSpec::TcpConnect("127.0.0.1:7001".into())
        );
        assert_eq!(
            "pty:/dev/ttyS2".parse::<BackendSpec>().unwrap().to_string(),
            "pty:/dev/ttyS2"
        );
        assert!(matches!(
            "serial:/dev/x".parse::<BackendSpec>(),
            Err(LinkError::UnknownBackend(_))
        ));
        assert!(matches!("mem:".parse::<BackendSpec>(), Err(LinkError::UnknownBackend(_))));
        assert!(matches!("mem".parse::<BackendSpec>(), Err(LinkError::UnknownBackend(_))));
    }

    #[test]
    fn default_port_config() {
        let c = PortConfig::default();
        assert_eq!(c.min_read_bytes, 1);
        assert_eq!(c.intercharacter_timeout, Duration::from_millis(500));
        assert_eq!(c.baud, 9600);
        assert!(c.validate().is_ok());

        let bad = PortConfig {
            min_read_bytes: 0,
            ..PortConfig::default()
        };
        assert!(matches!(bad.validate(), Err(LinkError::InvalidConfig(_))));
        let bad = PortConfig {
            intercharacter_timeout: Duration::ZERO,
            ..PortConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn open_memory_link_with_defaults() {
        let hub = MemHub::new();
        hub.register_pair("pairA").unwrap();
        let link = open_link_in(&hub, PortConfig::default(), "mem:pairA").unwrap();
        assert_eq!(link.backend(), Backend::InMemory);
        assert_eq!(link.config().min_read_bytes, 1);
        assert_eq!(link.config().intercharacter_timeout, Duration::from_millis(500));
    }

    #[test]
    fn unknown_memory_endpoint() {
        let hub = MemHub::new();
        let err = open_link_in(&hub, PortConfig::default(), "mem:unregistered").unwrap_err();
        assert!(err.to_string().contains("unknown endpoint"), "{err}");
    }

    #[test]
    fn send_counts_and_empty_write() {
        let hub = MemHub::new();
        let (mut a, mut b) = hub.make_loopback_pair("c").unwrap();
        assert_eq!(a.send_bytes(&[0x23, 0x01]).unwrap(), 2);
        assert_eq!(a.send_bytes(&[]).unwrap(), 0);
        assert_eq!(b.recv_byte(), RecvEvent::Byte(0x23));
        assert_eq!(b.recv_byte(), RecvEvent::Byte(0x01));
    }

    #[test]
    fn send_on_closed_link() {
        let hub = MemHub::new();
        let (mut a, _b) = hub.make_loopback_pair("closed").unwrap();
        a.close();
        let err = a.send_bytes(&[0x00]).unwrap_err();
        assert_eq!(err.to_string(), "link closed");
    }

    #[test]
    fn recv_passthrough_timeout_and_eof() {
        let hub = MemHub::new();
        let (mut a, mut b) = hub.make_loopback_pair("t").unwrap();
        a.send_bytes(&[0x41]).unwrap();
        assert_eq!(b.recv_byte(), RecvEvent::Byte(0x41));

        let start = Instant::now();
        assert_eq!(b.recv_byte(), RecvEvent::Timeout);
        let waited = start.elapsed();
        assert!(waited >= Duration::from_millis(450), "{waited:?}");
        assert!(waited < Duration::from_millis(900), "{waited:?}");

        drop(a);
        assert_eq!(b.recv_byte(), RecvEvent::Eof);
        assert_eq!(b.recv_byte(), RecvEvent::Eof);
    }

    #[test]
    fn timeout_loses_nothing() {
        let hub = MemHub::new();
        let config = PortConfig {
            intercharacter_timeout: Duration::from_millis(50),
            ..PortConfig::default()
        };
        let (mut a, mut b) = hub.make_loopback_pair_with("tl", config.clone(), config).unwrap();
        a.send_bytes(&[1, 2, 3]).unwrap();
        assert_eq!(b.recv_byte(), RecvEvent::Byte(1));
        a.send_bytes(&[4]).unwrap();
        assert_eq!(b.recv_byte(), RecvEvent::Byte(2));
        assert_eq!(b.recv_byte(), RecvEvent::Byte(3));
        assert_eq!(b.recv_byte(), RecvEvent::Byte(4));
        assert_eq!(b.recv_byte(), RecvEvent::Timeout);
        a.send_bytes(&[5]).unwrap();
        assert_eq!(b.recv_byte(), RecvEvent::Byte(5));
    }

    #[test]
    fn min_read_bytes_returns_partial_after_gap() {
        let hub = MemHub::new();
        let config = PortConfig {
            min_read_bytes: 4,
            intercharacter_timeout: Duration::from_millis(50),
            ..PortConfig::default()
        };
        let (mut a, mut b) = hub.make_loopback_pair_with("mr", config.clone(), config).unwrap();
        a.send_bytes(&[9, 8]).unwrap();
        // fewer than min_read_bytes, then a gap: both bytes are still delivered
        assert_eq!(b.recv_chunk(), RecvChunk::Data(vec![9, 8]));
        assert_eq!(b.recv_chunk(), RecvChunk::Timeout);
    }

    #[test]
    fn pacing_throttles_to_line_rate() {
        let hub = MemHub::new();
        let config = PortConfig {
            baud: 9600,
            pacing: true,
            ..PortConfig::default()
        };
        let (mut a, _b) = hub
            .make_loopback_pair_with("pace", config, PortConfig::default())
            .unwrap();
        let start = Instant::now();
        a.send_bytes(&[0u8; 96]).unwrap();
        // 96 bytes at 960 B/s
        assert!(start.elapsed() >= Duration::from_millis(95));
    }
}
