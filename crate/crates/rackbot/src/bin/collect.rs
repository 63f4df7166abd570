//! Collects a rope-pushing dataset from an in-process rack.

use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use rackbot::bench::Target;
use rackbot::config::RackConfig;
use rackbot::dataset::collect::{collect, AcceptMode, CollectConfig};
use rackbot::rack::Rack;

#[derive(Parser)]
#[command(about = "Collect rope-pushing episodes")]
struct Cli {
    #[arg(long)]
    rack: PathBuf,
    #[arg(long)]
    robots: usize,
    /// Episodes per robot.
    #[arg(long)]
    episodes: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pushes: usize,
    #[arg(long, value_enum, default_value_t = AcceptMode::Mask)]
    mode: AcceptMode,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let mut cfg = RackConfig::load(&cli.rack).with_context(|| format!("loading {}", cli.rack.display()))?;
    cfg.robot_count = cli.robots;
    cfg.validate()?;
    let rack = Rack::spawn(cfg.clone())?;
    let targets = Target::from_rack(&rack);
    let cc = CollectConfig {
        episodes_per_robot: cli.episodes,
        max_pushes: cli.pushes,
        mode: cli.mode,
        seed: cli.seed,
        ..CollectConfig::default()
    };
    let manifest = collect(&cfg, &targets, &cc, &cli.out)?;
    let aborted = manifest.episodes.iter().filter(|e| e.aborted).count();
    println!(
        "{} episodes ({aborted} aborted)  {:.1} s  {} commands  {:.1} MB",
        manifest.episodes.len(),
        manifest.total_duration_s,
        manifest.cumulative_motion_commands,
        manifest.dataset_size_bytes as f64 / 1e6
    );
    Ok(())
}
