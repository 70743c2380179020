//! Port table: which OBDH port talks to which subsystem, and how.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::framing::{ProtocolKind, GS_START};
use crate::transport::{ElectricalStandard, PortConfig, DEFAULT_BAUD, DEFAULT_INTERCHARACTER_TIMEOUT};

/// Subsystem id reserved for requests the OBDH answers itself.
pub const INTERNAL_ID: u8 = 0x00;

/// Default number of telemetry records kept in memory.
pub const DEFAULT_TELEMETRY_CAP: usize = 10_000;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("duplicate port `{0}`")]
    DuplicatePort(String),
    #[error("duplicate subsystem id {0:#04x}")]
    DuplicateId(u8),
    #[error("unknown subsystem kind `{0}`")]
    UnknownSubsystem(String),
    #[error("unknown test role `{0}`")]
    UnknownRole(String),
    #[error("unknown disposition `{0}`")]
    UnknownDisposition(String),
    #[error("port `{port}` is missing `{field}`")]
    MissingField { port: String, field: &'static str },
    #[error("port `{port}`: id {id:#04x} is not usable")]
    BadId { port: String, id: u8 },
    #[error("expected exactly one egse port, found {0}")]
    GroundPorts(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubsystemKind {
    Egse,
    Wde,
    Sts,
    Battery,
    Gps,
    Custom,
}

impl SubsystemKind {
    /// Protocol spoken on the subsystem side; `None` for the ground port.
    pub fn protocol(self) -> Option<ProtocolKind> {
        match self {
            SubsystemKind::Egse => None,
            SubsystemKind::Wde => Some(ProtocolKind::Wde),
            SubsystemKind::Sts => Some(ProtocolKind::Sts),
            SubsystemKind::Battery => Some(ProtocolKind::Battery),
            SubsystemKind::Gps => Some(ProtocolKind::Gps),
            SubsystemKind::Custom => Some(ProtocolKind::Custom),
        }
    }

    pub fn default_disposition(self) -> Disposition {
        match self {
            SubsystemKind::Wde | SubsystemKind::Sts | SubsystemKind::Egse => Disposition::ForwardedToGs,
            SubsystemKind::Battery | SubsystemKind::Gps | SubsystemKind::Custom => Disposition::StoredOnly,
        }
    }
}

impl FromStr for SubsystemKind {
    type Err = TableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "egse" => SubsystemKind::Egse,
            "wde" => SubsystemKind::Wde,
            "sts" => SubsystemKind::Sts,
            "battery" => SubsystemKind::Battery,
            "gps" => SubsystemKind::Gps,
            "custom" | "custom_pc104" => SubsystemKind::Custom,
            _ => return Err(TableError::UnknownSubsystem(s.to_string())),
        })
    }
}

impl fmt::Display for SubsystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubsystemKind::Egse => "egse",
            SubsystemKind::Wde => "wde",
            SubsystemKind::Sts => "sts",
            SubsystemKind::Battery => "battery",
            SubsystemKind::Gps => "gps",
            SubsystemKind::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestRole {
    Connected,
    /// Position in the close-loop chain, 1-based.
    LoopHook(u8),
}

impl FromStr for TestRole {
    type Err = TableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("connected") {
            return Ok(TestRole::Connected);
        }
        s.strip_prefix("hook")
            .and_then(|n| n.parse::<u8>().ok())
            .filter(|n| *n > 0)
            .map(TestRole::LoopHook)
            .ok_or_else(|| TableError::UnknownRole(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Disposition {
    ForwardedToGs,
    StoredOnly,
}

impl FromStr for Disposition {
    type Err = TableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "forward" | "forwarded" => Ok(Disposition::ForwardedToGs),
            "store" | "stored" | "store_only" => Ok(Disposition::StoredOnly),
            _ => Err(TableError::UnknownDisposition(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortRow {
    pub port_name: String,
    pub standard: ElectricalStandard,
    pub subsystem: SubsystemKind,
    /// Instance label, e.g. `WDE2`.
    pub label: String,
    pub subsystem_id: u8,
    pub role: TestRole,
    pub backend: String,
    pub disposition: Disposition,
    pub baud: u32,
    pub min_read_bytes: usize,
    pub intercharacter_timeout: Duration,
    pub pacing: bool,
}

impl PortRow {
    fn new(
        port_name: &str,
        standard: ElectricalStandard,
        subsystem: SubsystemKind,
        label: &str,
        subsystem_id: u8,
        role: TestRole,
    ) -> Self {
        PortRow {
            port_name: port_name.to_string(),
            standard,
            subsystem,
            label: label.to_string(),
            subsystem_id,
            role,
            backend: format!("mem:{port_name}"),
            disposition: subsystem.default_disposition(),
            baud: DEFAULT_BAUD,
            min_read_bytes: 1,
            intercharacter_timeout: DEFAULT_INTERCHARACTER_TIMEOUT,
            pacing: false,
        }
    }

    pub fn port_config(&self) -> PortConfig {
        PortConfig {
            port_name: self.port_name.clone(),
            baud: self.baud,
            min_read_bytes: self.min_read_bytes,
            intercharacter_timeout: self.intercharacter_timeout,
            electrical_standard: self.standard,
            pacing: self.pacing,
            connect_wait: Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortTable {
    rows: Vec<PortRow>,
}

impl Default for PortTable {
    /// Eight wired ports plus the custom housekeeping board.
    fn default() -> Self {
        use ElectricalStandard::*;
        use SubsystemKind::*;
        use TestRole::*;
        PortTable {
            rows: vec![
                PortRow::new("PortRxMainBoard2", Rs232, Egse, "EGSE", INTERNAL_ID, Connected),
                PortRow::new("PortRxMainBoard3", Ttl, Wde, "WDE1", 0x01, Connected),
                PortRow::new("PortRxOsci0", Ttl, Wde, "WDE2", 0x02, LoopHook(1)),
                PortRow::new("PortRxOsci2", Ttl, Wde, "WDE3", 0x03, LoopHook(2)),
                PortRow::new("PortRxOsci4", Rs422, Sts, "STS1", 0x04, Connected),
                PortRow::new("PortRxOsci6", Rs422, Sts, "STS2", 0x05, LoopHook(3)),
                PortRow::new("PortRxOsci1", Ttl, Battery, "Battery", 0x06, LoopHook(4)),
                PortRow::new("PortRxOsci3", Rs232, Gps, "GPS", 0x07, LoopHook(5)),
                PortRow::new("PortRxOsci5", Ttl, Custom, "CustomPC104", 0x08, Connected),
            ],
        }
    }
}

impl PortTable {
    pub fn from_rows(rows: Vec<PortRow>) -> Result<Self, TableError> {
        let table = PortTable { rows };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<(), TableError> {
        let mut names = HashSet::new();
        let mut ids = HashSet::new();
        let mut ground = 0;
        for row in &self.rows {
            if !names.insert(row.port_name.as_str()) {
                return Err(TableError::DuplicatePort(row.port_name.clone()));
            }
            if !ids.insert(row.subsystem_id) {
                return Err(TableError::DuplicateId(row.subsystem_id));
            }
            let id_ok = match row.subsystem {
                SubsystemKind::Egse => row.subsystem_id == INTERNAL_ID,
                _ => row.subsystem_id != INTERNAL_ID && row.subsystem_id != GS_START,
            };
            if !id_ok {
                return Err(TableError::BadId {
                    port: row.port_name.clone(),
                    id: row.subsystem_id,
                });
            }
            if row.subsystem == SubsystemKind::Egse {
                ground += 1;
            }
        }
        if ground != 1 {
            return Err(TableError::GroundPorts(ground));
        }
        Ok(())
    }

    pub fn rows(&self) -> &[PortRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, port_name: &str) -> Option<&PortRow> {
        self.rows.iter().find(|r| r.port_name == port_name)
    }

    pub fn by_id(&self, id: u8) -> Option<&PortRow> {
        self.rows
            .iter()
            .find(|r| r.subsystem_id == id && r.subsystem != SubsystemKind::Egse)
    }

    pub fn ground_port(&self) -> &PortRow {
        self.rows
            .iter()
            .find(|r| r.subsystem == SubsystemKind::Egse)
            .expect("validated table has a ground port")
    }

    /// Subsystem id → protocol, for parsing downlink envelopes.
    pub fn downlink_protocols(&self) -> HashMap<u8, ProtocolKind> {
        self.rows
            .iter()
            .filter_map(|r| r.subsystem.protocol().map(|p| (r.subsystem_id, p)))
            .collect()
    }
}

/// Node configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeConfig {
    pub table: PortTable,
    pub telemetry_cap: usize,
    /// Retry window for `tcp:` backends.
    pub connect_wait: Duration,
}

impl Default for NodeConfig {
    fn default() -> Self {
        NodeConfig {
            table: PortTable::default(),
            telemetry_cap: DEFAULT_TELEMETRY_CAP,
            connect_wait: Duration::ZERO,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    telemetry_cap: Option<usize>,
    connect_wait_ms: Option<u64>,
    #[serde(default)]
    replace_defaults: bool,
    #[serde(default)]
    port: Vec<RawRow>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRow {
    port: String,
    standard: Option<ElectricalStandard>,
    subsystem: Option<String>,
    name: Option<String>,
    id: Option<u8>,
    role: Option<String>,
    backend: Option<String>,
    disposition: Option<String>,
    baud: Option<u32>,
    min_read_bytes: Option<usize>,
    timeout_ms: Option<u64>,
    pacing: Option<bool>,
}

impl RawRow {
    fn apply(self, row: &mut PortRow) -> Result<(), TableError> {
        if let Some(s) = self.standard {
            row.standard = s;
        }
        if let Some(kind) = self.subsystem {
            row.subsystem = kind.parse()?;
            if self.disposition.is_none() {
                row.disposition = row.subsystem.default_disposition();
            }
        }
        if let Some(name) = self.name {
            row.label = name;
        }
        if let Some(id) = self.id {
            row.subsystem_id = id;
        }
        if let Some(role) = self.role {
            row.role = role.parse()?;
        }
        if let Some(backend) = self.backend {
            row.backend = backend;
        }
        if let Some(d) = self.disposition {
            row.disposition = d.parse()?;
        }
        if let Some(b) = self.baud {
            row.baud = b;
        }
        if let Some(m) = self.min_read_bytes {
            row.min_read_bytes = m;
        }
        if let Some(t) = self.timeout_ms {
            row.intercharacter_timeout = Duration::from_millis(t);
        }
        if let Some(p) = self.pacing {
            row.pacing = p;
        }
        Ok(())
    }
}

impl NodeConfig {
    /// Parse TOML. Rows merge onto the default table by port name unless
    /// `replace_defaults = true`; new port names need `subsystem` and `id`.
    pub fn from_toml(text: &str) -> Result<Self, TableError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| TableError::Parse(e.to_string()))?;
        let mut rows = if raw.replace_defaults {
            Vec::new()
        } else {
            PortTable::default().rows
        };
        let mut seen = HashSet::new();
        for raw_row in raw.port {
            if !seen.insert(raw_row.port.clone()) {
                return Err(TableError::DuplicatePort(raw_row.port));
            }
            match rows.iter_mut().find(|r| r.port_name == raw_row.port) {
                Some(row) => raw_row.apply(row)?,
                None => {
                    let port = raw_row.port.clone();
                    let kind: SubsystemKind = raw_row
                        .subsystem
                        .as_deref()
                        .ok_or_else(|| TableError::MissingField {
                            port: port.clone(),
                            field: "subsystem",
                        })?
                        .parse()?;
                    let id = raw_row.id.ok_or_else(|| TableError::MissingField {
                        port: port.clone(),
                        field: "id",
                    })?;
                    let mut row = PortRow::new(
                        &port,
                        ElectricalStandard::Rs232,
                        kind,
                        &port,
                        id,
                        TestRole::Connected,
                    );
                    raw_row.apply(&mut row)?;
                    rows.push(row);
                }
            }
        }
        Ok(NodeConfig {
            table: PortTable::from_rows(rows)?,
            telemetry_cap: raw.telemetry_cap.unwrap_or(DEFAULT_TELEMETRY_CAP),
            connect_wait: Duration::from_millis(raw.connect_wait_ms.unwrap_or(0)),
        })
    }
}

pub fn build_port_table(config: &str) -> Result<PortTable, TableError> {
    NodeConfig::from_toml(config).map(|c| c.table)
}
