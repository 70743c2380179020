//! The OBDH node: one receive task per port around a shared [`Router`].

mod router;
mod table;
mod telemetry;

use std::sync::Arc;
use std::thread::{self, JoinHandle};

use thiserror::Error;

pub use router::{
    frame_log_line, route_uplink, run_forward_task, run_gs_task, run_subsystem_task,
    CounterSnapshot, Destination, ExitReason, Router, TaskExit, CMD_REPLAY, CMD_STATUS,
};
pub use table::{
    build_port_table, Disposition, NodeConfig, PortRow, PortTable, SubsystemKind, TableError,
    TestRole, DEFAULT_TELEMETRY_CAP, INTERNAL_ID,
};
pub use telemetry::{TelemetryFilter, TelemetryRecord, TelemetryStore};

use crate::transport::{open_link_in, BackendSpec, Link, LinkError, MemHub};

#[derive(Debug, Error)]
pub enum NodeError {
    #[error("port {port}: {source}")]
    Link { port: String, source: LinkError },
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("port `{0}` is not in the port table")]
    UnknownPort(String),
    #[error("forward rule {0} -> {1} needs links on both ports")]
    BadForward(String, String),
    #[error("failed to spawn task: {0}")]
    Spawn(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct NodeOptions {
    pub telemetry_cap: usize,
    /// `(rx_port, tx_port)`: bytes received on `rx_port` are written
    /// unchanged to `tx_port` instead of being deframed.
    pub forwards: Vec<(String, String)>,
}

impl Default for NodeOptions {
    fn default() -> Self {
        NodeOptions {
            telemetry_cap: DEFAULT_TELEMETRY_CAP,
            forwards: Vec::new(),
        }
    }
}

pub struct Node {
    router: Arc<Router>,
    tasks: Vec<(String, JoinHandle<TaskExit>)>,
}

impl Node {
    /// Open every row's backend. `mem:` pairs are registered on `hub` on
    /// demand so the peer end stays claimable.
    pub fn open_links(config: &NodeConfig, hub: &MemHub) -> Result<Vec<(String, Link)>, NodeError> {
        let mut links = Vec::new();
        for row in config.table.rows() {
            let link_err = |source| NodeError::Link {
                port: row.port_name.clone(),
                source,
            };
            if let BackendSpec::Memory(name) = row.backend.parse::<BackendSpec>().map_err(link_err)? {
                hub.ensure_pair(&name);
            }
            let mut port_config = row.port_config();
            port_config.connect_wait = config.connect_wait;
            let link = open_link_in(hub, port_config, &row.backend).map_err(link_err)?;
            links.push((row.port_name.clone(), link));
        }
        Ok(links)
    }

    /// Spawn one task per supplied link. Ports without a link stay idle.
    pub fn start(table: PortTable, links: Vec<(String, Link)>, options: NodeOptions) -> Result<Node, NodeError> {
        let router = Arc::new(Router::new(table, options.telemetry_cap));
        let mut readers = Vec::new();
        for (port, link) in links {
            if router.table().row(&port).is_none() {
                return Err(NodeError::UnknownPort(port));
            }
            let (reader, writer) = link.split();
            router.attach_writer(&port, writer);
            readers.push((port, reader));
        }
        for (rx, tx) in &options.forwards {
            let has = |p: &str| readers.iter().any(|(name, _)| name == p);
            if !has(rx) || !has(tx) {
                return Err(NodeError::BadForward(rx.clone(), tx.clone()));
            }
        }

        let mut tasks = Vec::new();
        for (port, reader) in readers {
            let r = router.clone();
            let forward = options
                .forwards
                .iter()
                .find(|(rx, _)| *rx == port)
                .map(|(_, tx)| tx.clone());
            let name = port.clone();
            let handle = thread::Builder::new().name(format!("rx-{port}")).spawn(move || {
                if let Some(tx) = forward {
                    run_forward_task(&r, &name, reader, &tx)
                } else if router::is_ground(&r, &name) {
                    run_gs_task(&r, reader)
                } else {
                    run_subsystem_task(&r, &name, reader)
                }
            })?;
            tasks.push((port, handle));
        }
        Ok(Node { router, tasks })
    }

    pub fn router(&self) -> &Arc<Router> {
        &self.router
    }

    pub fn ports(&self) -> impl Iterator<Item = &str> {
        self.tasks.iter().map(|(p, _)| p.as_str())
    }

    /// Block until the task on `port` ends.
    pub fn wait_for(&mut self, port: &str) -> Option<TaskExit> {
        let idx = self.tasks.iter().position(|(p, _)| p == port)?;
        let (_, handle) = self.tasks.remove(idx);
        handle.join().ok()
    }

    /// Ask every task to stop and join them. Tasks notice within one
    /// inter-character timeout.
    pub fn shutdown(self) -> Vec<TaskExit> {
        self.router.request_stop();
        self.tasks
            .into_iter()
            .filter_map(|(_, handle)| handle.join().ok())
            .collect()
    }
}
