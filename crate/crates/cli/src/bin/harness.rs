use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand};
use obdh::harness::{run_close_loop_with, run_integration_scenario, LoopConfig, LoopTopology, Script};
use obdh::transport::{open_link, PortConfig};
use obdh_cli::{init_logging, load_node_config};

/// Bench test drivers.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Pump frames through the loop-hook chain and check every one returns.
    Closeloop {
        /// Loop topology (TOML); the standard five-hook chain by default.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seconds to pump; 43200 for a twelve-hour soak.
        #[arg(long, default_value_t = 60)]
        duration: u64,
        /// Frames per second.
        #[arg(long, default_value_t = 100.0)]
        rate: f64,
        #[arg(long, default_value_t = 64)]
        payload_len: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Leave cable N (0-based) unplugged.
        #[arg(long)]
        disconnect_cable: Option<usize>,
    },
    /// Drive a running node from the ground-station side.
    Scenario {
        /// Step script (TOML); the built-in WDE/STS script by default.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Link to the node's EGSE port.
        #[arg(long)]
        gs_backend: String,
        /// Node config, for the id → protocol map used to parse downlinks.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        connect_wait_ms: u64,
    },
}

fn read(path: &PathBuf) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn run(cmd: Cmd) -> anyhow::Result<bool> {
    match cmd {
        Cmd::Closeloop {
            config,
            duration,
            rate,
            payload_len,
            seed,
            disconnect_cable,
        } => {
            let topology = match config {
                Some(p) => LoopTopology::from_toml(&read(&p)?)?,
                None => LoopTopology::default(),
            };
            let report = run_close_loop_with(&LoopConfig {
                topology,
                duration: Duration::from_secs(duration),
                rate,
                payload_len,
                seed,
                disconnect_cable,
                ..LoopConfig::default()
            })?;
            println!("{report}");
            println!("{}", report.summary_line());
            Ok(report.passed())
        }
        Cmd::Scenario {
            script,
            gs_backend,
            config,
            connect_wait_ms,
        } => {
            let script = match script {
                Some(p) => Script::from_toml(&read(&p)?)?,
                None => Script::default_integration(),
            };
            let node_cfg = load_node_config(config.as_deref())?;
            let gs = open_link(
                PortConfig {
                    connect_wait: Duration::from_millis(connect_wait_ms),
                    ..PortConfig::named("ground-station")
                },
                &gs_backend,
            )
            .with_context(|| format!("opening {gs_backend}"))?;
            let report = run_integration_scenario(&script, gs, node_cfg.table.downlink_protocols());
            for line in &report.transcript {
                println!("{line}");
            }
            println!("{report}");
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    init_logging();
    match run(Cli::parse().cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("harness: {e:#}");
            ExitCode::from(2)
        }
    }
}
