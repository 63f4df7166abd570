//! Rack orchestrator: serves N simulated cells and the registry.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use rackbot::config::{Deployment, RackConfig};
use rackbot::rack::{run_cell_process, Rack};

#[derive(Parser)]
#[command(about = "Simulated gripper rack")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start every cell and serve until interrupted.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        robots: Option<usize>,
        #[arg(long)]
        base_port: Option<u16>,
        #[arg(long)]
        registry_port: Option<u16>,
        /// Run each cell as a child process.
        #[arg(long)]
        processes: bool,
    },
    /// Print the default configuration as TOML.
    DefaultConfig,
    /// Serve one cell whose configuration arrives on stdin (used by
    /// process deployment).
    #[command(hide = true)]
    Cell {
        #[arg(long)]
        host: String,
        #[arg(long)]
        port: u16,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Serve {
            config,
            robots,
            base_port,
            registry_port,
            processes,
        } => {
            let mut cfg = match &config {
                Some(path) => RackConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
                None => RackConfig::default(),
            };
            if let Some(n) = robots {
                cfg.robot_count = n;
            }
            if let Some(p) = base_port {
                cfg.base_port = p;
            }
            if let Some(p) = registry_port {
                cfg.registry_port = p;
            }
            if processes {
                cfg.deployment = Deployment::Processes;
            }
            cfg.validate()?;
            let exe = std::env::current_exe().context("locating the rack executable")?;
            let rack = Rack::spawn_with(cfg, Some(exe))?;
            println!("registry {}", rack.registry_url());
            for i in 0..rack.len() {
                println!("{} {}", rackbot::config::robot_id(i), rack.base_url(i));
            }
            rack.wait_for_interrupt();
            Ok(())
        }
        Command::DefaultConfig => {
            print!("{}", RackConfig::default().to_toml());
            Ok(())
        }
        Command::Cell { host, port } => run_cell_process(&host, port),
    }
}
