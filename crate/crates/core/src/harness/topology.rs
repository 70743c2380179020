use std::collections::HashSet;

use serde::Deserialize;

use super::HarnessError;

/// A close-loop chain: data enters on `ingress`, is forwarded inside the
/// OBDH from rx port to tx port, leaves through loop cables from tx port to
/// the next rx port, and finally returns on `egress`.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopTopology {
    pub ingress: String,
    pub egress: String,
    /// `(rx_port, tx_port)` pairs handled by the OBDH.
    pub internal_forwards: Vec<(String, String)>,
    /// `(tx_port, rx_port)` pairs joined by an external hook.
    pub cables: Vec<(String, String)>,
}

impl Default for LoopTopology {
    /// The five loop hooks of the standard port table:
    /// computer → Osci3 ⇒ Osci0 → Osci1 ⇒ Osci2 → Osci6 ⇒ Osci3 → computer.
    fn default() -> Self {
        let pair = |a: &str, b: &str| (a.to_string(), b.to_string());
        LoopTopology {
            ingress: "PortRxOsci3".into(),
            egress: "PortRxOsci3".into(),
            internal_forwards: vec![
                pair("PortRxOsci3", "PortRxOsci0"),
                pair("PortRxOsci1", "PortRxOsci2"),
                pair("PortRxOsci6", "PortRxOsci3"),
            ],
            cables: vec![pair("PortRxOsci0", "PortRxOsci1"), pair("PortRxOsci2", "PortRxOsci6")],
        }
    }
}

/// One step of the walked path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Hop {
    Internal { rx: String, tx: String },
    Cable { tx: String, rx: String },
}

impl LoopTopology {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Walk from ingress to egress, checking every rule is used exactly once
    /// and no port is revisited.
    pub fn walk(&self) -> Result<Vec<Hop>, HarnessError> {
        let mut hops = Vec::new();
        let mut seen_rx = HashSet::new();
        let mut seen_tx = HashSet::new();
        let mut rx = self.ingress.clone();
        loop {
            if !seen_rx.insert(rx.clone()) {
                return Err(HarnessError::Topology(format!("cycle through {rx} without reaching egress")));
            }
            let tx = self
                .internal_forwards
                .iter()
                .find(|(r, _)| *r == rx)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| HarnessError::Topology(format!("no internal forward from {rx}")))?;
            if !seen_tx.insert(tx.clone()) {
                return Err(HarnessError::Topology(format!("cycle through {tx} without reaching egress")));
            }
            hops.push(Hop::Internal { rx: rx.clone(), tx: tx.clone() });
            if tx == self.egress {
                break;
            }
            let next = self
                .cables
                .iter()
                .find(|(t, _)| *t == tx)
                .map(|(_, r)| r.clone())
                .ok_or_else(|| HarnessError::Topology(format!("no cable from {tx}")))?;
            hops.push(Hop::Cable { tx, rx: next.clone() });
            rx = next;
        }
        let used = hops.len();
        let listed = self.internal_forwards.len() + self.cables.len();
        if used != listed {
            return Err(HarnessError::Topology(format!(
                "{} of {listed} hops are not on the ingress→egress path",
                listed - used
            )));
        }
        Ok(hops)
    }

    /// Every port the loop touches, in path order, without repeats.
    pub fn ports(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (a, b) in self.internal_forwards.iter().chain(&self.cables) {
            for p in [a, b] {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
        }
        out
    }
}
