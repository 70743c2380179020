use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::Parser;
use obdh::sim::{hook_node_forward, serve, ServeOptions, SimKind};
use obdh::transport::{open_link, PortConfig};
use obdh_cli::{init_logging, parse_byte};

/// Subsystem simulator, or a passive hook node standing in for a loop cable.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// wde, sts, battery, gps, custom or hook
    kind: String,
    /// Link to the OBDH port, e.g. `tcp-listen:127.0.0.1:7001` or `pty:/dev/ttyUSB0`.
    #[arg(long)]
    backend: String,
    /// Output side of a hook node.
    #[arg(long)]
    out: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_parser = parse_byte, default_value = "1")]
    device_id: u8,
    /// Unsolicited frames per second; request-driven only when absent.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long, default_value_t = 9600)]
    baud: u32,
    #[arg(long, default_value_t = 10_000)]
    connect_wait_ms: u64,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let kind: SimKind = cli.kind.parse()?;
    let config = |name: &str| PortConfig {
        baud: cli.baud,
        connect_wait: Duration::from_millis(cli.connect_wait_ms),
        ..PortConfig::named(name)
    };
    let link = open_link(config(&cli.kind), &cli.backend).with_context(|| format!("opening {}", cli.backend))?;
    match kind.build(cli.device_id, cli.seed) {
        Some(mut sim) => {
            if cli.out.is_some() {
                bail!("--out only applies to the hook node");
            }
            log::info!("{} simulator on {}", cli.kind, cli.backend);
            let exit = serve(
                sim.as_mut(),
                link,
                ServeOptions {
                    rate_hz: cli.rate,
                    stop: None,
                },
            );
            log::info!("{} simulator stopped: {exit:?}", cli.kind);
        }
        None => {
            let Some(out) = cli.out else {
                bail!("the hook node needs --out");
            };
            let out_link = open_link(config("hook-out"), &out).with_context(|| format!("opening {out}"))?;
            log::info!("hook {} -> {out}", cli.backend);
            let (reader, _in_writer) = link.split();
            let (_out_reader, writer) = out_link.split();
            let n = hook_node_forward(reader, writer);
            log::info!("hook forwarded {n} bytes");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    init_logging();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sim: {e:#}");
            ExitCode::FAILURE
        }
    }
}
