//! In-process link pairs.

use std::collections::{HashMap, VecDeque};
use std::io;
use std::sync::{Arc, Condvar, Mutex, OnceLock};
use std::time::{Duration, Instant};

use super::{Backend, ByteSink, ByteSource, Fill, Link, LinkError, PortConfig};

#[derive(Default)]
struct PipeState {
    buf: VecDeque<u8>,
    writer_closed: bool,
    reader_closed: bool,
}

/// One direction of a pair.
#[derive(Default)]
struct Pipe {
    state: Mutex<PipeState>,
    ready: Condvar,
}

struct PipeReader(Arc<Pipe>);
struct PipeWriter(Arc<Pipe>);

impl ByteSource for PipeReader {
    fn fill(&mut self, buf: &mut [u8], timeout: Duration) -> io::Result<Fill> {
        let deadline = Instant::now() + timeout;
        let mut state = self.0.state.lock().unwrap();
        loop {
            if !state.buf.is_empty() {
                let n = buf.len().min(state.buf.len());
                for (dst, src) in buf.iter_mut().zip(state.buf.drain(..n)) {
                    *dst = src;
                }
                return Ok(Fill::Data(n));
            }
            if state.writer_closed {
                return Ok(Fill::Eof);
            }
            let now = Instant::now();
            if now >= deadline {
                return Ok(Fill::TimedOut);
            }
            state = self.0.ready.wait_timeout(state, deadline - now).unwrap().0;
        }
    }
}

impl Drop for PipeReader {
    fn drop(&mut self) {
        self.0.state.lock().unwrap().reader_closed = true;
    }
}

impl ByteSink for PipeWriter {
    fn write_all(&mut self, data: &[u8]) -> Result<(), LinkError> {
        let mut state = self.0.state.lock().unwrap();
        if state.writer_closed || state.reader_closed {
            return Err(LinkError::Closed);
        }
        state.buf.extend(data);
        drop(state);
        self.0.ready.notify_all();
        Ok(())
    }

    fn close(&mut self) {
        self.0.state.lock().unwrap().writer_closed = true;
        self.0.ready.notify_all();
    }
}

struct End {
    rx: Arc<Pipe>,
    tx: Arc<Pipe>,
}

impl End {
    fn into_link(self, config: PortConfig) -> Link {
        Link::from_parts(
            config,
            Backend::InMemory,
            Box::new(PipeReader(self.rx)),
            Box::new(PipeWriter(self.tx)),
        )
    }
}

fn new_ends() -> (End, End) {
    let ab = Arc::new(Pipe::default());
    let ba = Arc::new(Pipe::default());
    (
        End {
            rx: ba.clone(),
            tx: ab.clone(),
        },
        End { rx: ab, tx: ba },
    )
}

/// Registry of named in-memory pairs.
///
/// A registered pair has two unclaimed ends; each `open` of `mem:<name>`
/// claims one of them. Names are never reused within a hub.
#[derive(Default)]
pub struct MemHub {
    pairs: Mutex<HashMap<String, Vec<End>>>,
}

impl MemHub {
    pub fn new() -> Self {
        MemHub::default()
    }

    pub fn global() -> &'static MemHub {
        static HUB: OnceLock<MemHub> = OnceLock::new();
        HUB.get_or_init(MemHub::new)
    }

    pub fn register_pair(&self, name: &str) -> Result<(), LinkError> {
        let mut pairs = self.pairs.lock().unwrap();
        if pairs.contains_key(name) {
            return Err(LinkError::Duplicate(name.to_string()));
        }
        let (a, b) = new_ends();
        pairs.insert(name.to_string(), vec![b, a]);
        Ok(())
    }

    /// Register `name` unless it already exists.
    pub fn ensure_pair(&self, name: &str) {
        let mut pairs = self.pairs.lock().unwrap();
        pairs.entry(name.to_string()).or_insert_with(|| {
            let (a, b) = new_ends();
            vec![b, a]
        });
    }

    pub fn is_registered(&self, name: &str) -> bool {
        self.pairs.lock().unwrap().contains_key(name)
    }

    pub fn open(&self, config: PortConfig, name: &str) -> Result<Link, LinkError> {
        let mut pairs = self.pairs.lock().unwrap();
        let ends = pairs
            .get_mut(name)
            .ok_or_else(|| LinkError::UnknownEndpoint(name.to_string()))?;
        let end = ends
            .pop()
            .ok_or_else(|| LinkError::EndpointInUse(name.to_string()))?;
        Ok(end.into_link(config))
    }

    pub fn make_loopback_pair(&self, name: &str) -> Result<(Link, Link), LinkError> {
        self.make_loopback_pair_with(name, PortConfig::named(name), PortConfig::named(name))
    }

    pub fn make_loopback_pair_with(
        &self,
        name: &str,
        a: PortConfig,
        b: PortConfig,
    ) -> Result<(Link, Link), LinkError> {
        a.validate()?;
        b.validate()?;
        self.register_pair(name)?;
        let first = self.open(a, name)?;
        let second = self.open(b, name)?;
        Ok((first, second))
    }
}
