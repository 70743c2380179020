use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand};
use obdh::harness::LoopTopology;
use obdh::node::{Node, NodeOptions};
use obdh::transport::MemHub;
use obdh_cli::{init_logging, load_node_config};

/// On-board data handling node.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Open every port in the table and route until the ground link closes.
    Run {
        /// Node config (TOML). Without it the built-in nine-port table is
        /// used with in-memory backends.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        telemetry_cap: Option<usize>,
        /// Retry window for `tcp:` backends, overriding the config.
        #[arg(long)]
        connect_wait_ms: Option<u64>,
        /// Wire the ports for a close-loop test: raw forwarding per the
        /// topology's internal forwards.
        #[arg(long)]
        loop_topology: Option<PathBuf>,
    },
}

fn run(
    config: Option<PathBuf>,
    telemetry_cap: Option<usize>,
    connect_wait_ms: Option<u64>,
    loop_topology: Option<PathBuf>,
) -> anyhow::Result<()> {
    let mut cfg = load_node_config(config.as_deref())?;
    if let Some(cap) = telemetry_cap {
        cfg.telemetry_cap = cap;
    }
    if let Some(ms) = connect_wait_ms {
        cfg.connect_wait = Duration::from_millis(ms);
    }
    let forwards = match loop_topology {
        Some(p) => {
            let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            let topo = LoopTopology::from_toml(&text)?;
            topo.walk()?;
            topo.internal_forwards
        }
        None => Vec::new(),
    };

    let links = Node::open_links(&cfg, MemHub::global())?;
    let ground = cfg.table.ground_port().port_name.clone();
    let mut node = Node::start(
        cfg.table,
        links,
        NodeOptions {
            telemetry_cap: cfg.telemetry_cap,
            forwards,
        },
    )?;
    log::info!("obdh running; ground port {ground}");
    let exit = node.wait_for(&ground);
    log::info!("ground task ended: {exit:?}");
    let counters = node.router().counters();
    node.shutdown();
    println!("{}", counters.status_text());
    Ok(())
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run {
            config,
            telemetry_cap,
            connect_wait_ms,
            loop_topology,
        } => run(config, telemetry_cap, connect_wait_ms, loop_topology),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("obdh: {e:#}");
            ExitCode::FAILURE
        }
    }
}
