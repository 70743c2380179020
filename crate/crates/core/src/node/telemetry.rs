use std::collections::VecDeque;
use std::time::Instant;

use super::Disposition;

/// A subsystem frame kept in OBDH memory.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRecord {
    pub timestamp: Instant,
    pub source_port: String,
    pub payload: Vec<u8>,
    pub disposition: Disposition,
}

#[derive(Debug, Clone, Default)]
pub struct TelemetryFilter {
    pub source_port: Option<String>,
    /// Inclusive lower bound on `timestamp`.
    pub since: Option<Instant>,
    pub limit: Option<usize>,
}

impl TelemetryFilter {
    pub fn port(port: impl Into<String>) -> Self {
        TelemetryFilter {
            source_port: Some(port.into()),
            ..Default::default()
        }
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = Some(limit);
        self
    }

    fn matches(&self, rec: &TelemetryRecord) -> bool {
        self.source_port.as_ref().is_none_or(|p| *p == rec.source_port)
            && self.since.is_none_or(|t| rec.timestamp >= t)
    }
}

/// Bounded ring of records, oldest evicted first.
#[derive(Debug)]
pub struct TelemetryStore {
    records: VecDeque<TelemetryRecord>,
    capacity: usize,
    evicted: u64,
}

impl TelemetryStore {
    pub fn new(capacity: usize) -> Self {
        TelemetryStore {
            records: VecDeque::with_capacity(capacity.min(1024)),
            capacity: capacity.max(1),
            evicted: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn evicted(&self) -> u64 {
        self.evicted
    }

    /// Empty payloads are not records and are ignored.
    pub fn append(&mut self, rec: TelemetryRecord) -> bool {
        if rec.payload.is_empty() {
            return false;
        }
        if self.records.len() == self.capacity {
            self.records.pop_front();
            self.evicted += 1;
        }
        self.records.push_back(rec);
        true
    }

    /// Matching records, oldest first, at most `limit` of the newest.
    pub fn query(&self, filter: &TelemetryFilter) -> Vec<TelemetryRecord> {
        let limit = filter.limit.unwrap_or(usize::MAX);
        let mut out: Vec<_> = self
            .records
            .iter()
            .rev()
            .filter(|r| filter.matches(r))
            .take(limit)
            .cloned()
            .collect();
        out.reverse();
        out
    }
}
