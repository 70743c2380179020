//! Helpers shared by the command-line front ends.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use obdh::node::NodeConfig;

/// Log records go to stderr as bare messages; frame lines carry their own
/// timestamp. `RUST_LOG` overrides the default `info` level.
pub fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| writeln!(buf, "{}", record.args()))
        .init();
}

/// `0x`-prefixed hex or plain decimal.
pub fn parse_byte(text: &str) -> Result<u8, String> {
    let parsed = match text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        Some(hex) => u8::from_str_radix(hex, 16),
        None => text.parse(),
    };
    parsed.map_err(|e| format!("`{text}`: {e}"))
}

pub fn load_node_config(path: Option<&Path>) -> anyhow::Result<NodeConfig> {
    match path {
        None => Ok(NodeConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            NodeConfig::from_toml(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}
