use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use super::HarnessError;
use crate::node::{Node, NodeOptions, PortTable, Router};
use crate::transport::{Link, MemHub, PortConfig};

static BENCH_ID: AtomicU64 = AtomicU64::new(0);

/// A node wired to in-memory links on every port of its table. The far ends
/// are handed out with [`NodeBench::take`] to play ground station, subsystem
/// or loop cable.
pub struct NodeBench {
    node: Node,
    far: HashMap<String, Link>,
}

impl NodeBench {
    pub fn start(table: PortTable, options: NodeOptions) -> Result<Self, HarnessError> {
        Self::start_with_timeout(table, options, Duration::from_millis(100))
    }

    /// `timeout` is the inter-character timeout on both ends of every link.
    pub fn start_with_timeout(
        table: PortTable,
        options: NodeOptions,
        timeout: Duration,
    ) -> Result<Self, HarnessError> {
        let hub = MemHub::new();
        let run = BENCH_ID.fetch_add(1, Ordering::Relaxed);
        let mut near = Vec::new();
        let mut far = HashMap::new();
        for row in table.rows() {
            let cfg = |name: String| PortConfig {
                intercharacter_timeout: timeout,
                ..PortConfig::named(name)
            };
            let (a, b) = hub.make_loopback_pair_with(
                &format!("bench{run}/{}", row.port_name),
                cfg(row.port_name.clone()),
                cfg(format!("{}-far", row.port_name)),
            )?;
            near.push((row.port_name.clone(), a));
            far.insert(row.port_name.clone(), b);
        }
        let node = Node::start(table, near, options)?;
        Ok(NodeBench { node, far })
    }

    /// The far end of `port`. Panics if the port is unknown or already taken.
    pub fn take(&mut self, port: &str) -> Link {
        self.far
            .remove(port)
            .unwrap_or_else(|| panic!("no free far end for {port}"))
    }

    /// Far end of the EGSE port.
    pub fn take_ground(&mut self) -> Link {
        let port = self.node.router().table().ground_port().port_name.clone();
        self.take(&port)
    }

    pub fn router(&self) -> &Router {
        self.node.router()
    }

    pub fn shutdown(self) {
        drop(self.far);
        self.node.shutdown();
    }
}
