use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::Parser;
use obdh::transport::{open_link, PortConfig};
use obdh_cli::{init_logging, load_node_config};
use obdh_gateway::Gateway;

/// EGSE gateway: WebSocket clients on one side, the node's ground link on
/// the other.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[arg(long)]
    gs_backend: String,
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: String,
    /// Node config, for the id → protocol map used to parse downlinks.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    connect_wait_ms: u64,
}

async fn run(cli: Cli) -> anyhow::Result<()> {
    let node_cfg = load_node_config(cli.config.as_deref())?;
    let link = open_link(
        PortConfig {
            connect_wait: Duration::from_millis(cli.connect_wait_ms),
            ..PortConfig::named("egse")
        },
        &cli.gs_backend,
    )
    .with_context(|| format!("opening {}", cli.gs_backend))?;
    let gw = Gateway::bind(link, node_cfg.table.downlink_protocols(), &cli.listen).await?;
    log::info!("gateway listening on http://{}/ws", gw.local_addr());
    tokio::select! {
        r = gw.run() => r?,
        _ = tokio::signal::ctrl_c() => log::info!("interrupted"),
    }
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    init_logging();
    match run(Cli::parse()).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gateway: {e:#}");
            ExitCode::FAILURE
        }
    }
}
