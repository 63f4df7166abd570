//! Replays recorded action logs on a fresh rack and compares rope states.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::Parser;
use rackbot::config::RackConfig;
use rackbot::dataset::collect::robot_index;
use rackbot::dataset::layout::read_manifest;
use rackbot::dataset::replay::replay_robot;
use rackbot::rack::Rack;

#[derive(Parser)]
#[command(about = "Replay dataset episodes")]
struct Cli {
    #[arg(long)]
    dataset: PathBuf,
    /// `robot-00/ep-0002`, or `all`. Earlier episodes of the same robot
    /// are replayed first.
    #[arg(long, default_value = "all")]
    episode: String,
    /// Rack configuration; defaults to the one stored in the manifest.
    #[arg(long)]
    rack: Option<PathBuf>,
    /// Overrides the simulated time scale.
    #[arg(long)]
    time_scale: Option<f64>,
}

fn main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    let manifest = read_manifest(&cli.dataset).context("reading manifest")?;
    let mut cfg = match &cli.rack {
        Some(path) => RackConfig::load(path)?,
        None => RackConfig::from_toml(&manifest.environment.rack_config)?,
    };
    if let Some(scale) = cli.time_scale {
        cfg.server.time_scale = scale;
    }
    let selection: Vec<(String, Option<String>)> = if cli.episode == "all" {
        manifest.robot_ids.iter().map(|r| (r.clone(), None)).collect()
    } else {
        let Some((robot, ep)) = cli.episode.split_once('/') else {
            bail!("--episode must be <robot>/<episode> or all");
        };
        vec![(robot.to_string(), Some(ep.to_string()))]
    };
    let mut needed = 0;
    for (robot, _) in &selection {
        let i = robot_index(robot).with_context(|| format!("robot id {robot}"))?;
        needed = needed.max(i + 1);
    }
    cfg.robot_count = needed;
    let rack = Rack::spawn(cfg)?;
    let mut ok = true;
    for (robot, until) in &selection {
        let client = rack.client(robot_index(robot).expect("checked above"));
        let results = replay_robot(&client, &cli.dataset, robot, until.as_deref(), Duration::from_secs(60))?;
        for r in results {
            let verdict = match r.identical {
                Some(true) => "identical",
                Some(false) => {
                    ok = false;
                    "DIFFERS"
                }
                None => "not recorded",
            };
            println!(
                "{}/{}  {} commands  {verdict}  max deviation {:.3e} mm",
                r.robot_id, r.episode_id, r.commands, r.max_deviation_mm
            );
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
