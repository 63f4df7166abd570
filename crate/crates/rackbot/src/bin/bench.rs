//! Fleet benchmarks: camera stress test and repeatability protocol.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand};
use rackbot::bench::repeat::{self, ProbeAxis, RepeatConfig};
use rackbot::bench::stress::{self, Fault, StressConfig};
use rackbot::bench::Target;
use rackbot::config::RackConfig;
use rackbot::rack::Rack;

#[derive(Parser)]
#[command(about = "Benchmarks against an in-process rack")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Poll both cameras of a growing number of robots.
    Stress {
        #[arg(long)]
        rack: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        fps: f64,
        #[arg(long, default_value_t = 30.0)]
        phase_secs: f64,
        /// Comma-separated robot counts; defaults to 1..=robot_count.
        #[arg(long, value_delimiter = ',')]
        phases: Vec<usize>,
        /// Kill a robot during a phase: `robot,phase,seconds`.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        kill: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Return to a reference pose after random waypoints and read a dial.
    Repeat {
        #[arg(long)]
        rack: PathBuf,
        #[arg(long, value_enum)]
        axis: ProbeAxis,
        #[arg(long)]
        robots: Option<usize>,
        /// Waypoints per robot; each is followed by `reps` returns.
        #[arg(long, default_value_t = 5)]
        waypoints: usize,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn report(failures: Vec<String>) -> ExitCode {
    if failures.is_empty() {
        println!("all checks passed");
        return ExitCode::SUCCESS;
    }
    for f in failures {
        println!("FAILED: {f}");
    }
    ExitCode::FAILURE
}

fn main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Stress {
            rack,
            fps,
            phase_secs,
            phases,
            kill,
            out,
        } => {
            let cfg = RackConfig::load(&rack).with_context(|| format!("loading {}", rack.display()))?;
            let budget = cfg.bandwidth_budget;
            let rack = Rack::spawn(cfg)?;
            let targets = Target::from_rack(&rack);
            let phases = if phases.is_empty() { StressConfig::ramp(rack.len()) } else { phases };
            let rack = std::sync::Arc::new(rack);
            let faults = kill
                .chunks(3)
                .map(|k| {
                    let rack = rack.clone();
                    let robot = k[0] as usize;
                    Fault {
                        phase: k[1] as usize,
                        at_s: k[2],
                        action: Box::new(move || rack.kill(robot)),
                    }
                })
                .collect();
            let sc = StressConfig {
                fps,
                phase_secs,
                phases,
                request_timeout: Duration::from_secs(2),
                bandwidth_budget: budget,
            };
            let result = stress::run_stress(&targets, &sc, faults)?;
            for p in &result.phases {
                println!(
                    "{:>3} robots  {:>6} requests  {:>4} errors  {:>7.1} MB/s  p50 {:>6.2} ms  p95 {:>6.2} ms  max {:>7.2} ms",
                    p.robots,
                    p.requests,
                    p.errors,
                    p.bytes_per_sec / 1e6,
                    p.latency_p50_ms,
                    p.latency_p95_ms,
                    p.latency_max_ms
                );
            }
            stress::write_report(&result, &out)?;
            Ok(report(stress::check(&result)))
        }
        Command::Repeat {
            rack,
            axis,
            robots,
            waypoints,
            reps,
            seed,
            out,
        } => {
            let mut cfg = RackConfig::load(&rack).with_context(|| format!("loading {}", rack.display()))?;
            if let Some(n) = robots {
                cfg.robot_count = n;
            }
            let k = &cfg.kinematics;
            let rc = RepeatConfig {
                axis,
                waypoint_sets: waypoints,
                waypoints_per_set: 1,
                reps,
                seed,
                travel_mm: [k.workspace_mm[0], k.workspace_mm[1], k.z_travel_mm],
                sigma_mm: match axis {
                    ProbeAxis::Xy => k.sigma_xy_mm,
                    ProbeAxis::Z => k.sigma_z_mm,
                },
                poll: Duration::from_millis(2),
                idle_timeout: Duration::from_secs(30),
            };
            let rack = Rack::spawn(cfg)?;
            let result = repeat::run_repeatability(&Target::from_rack(&rack), &rc)?;
            println!(
                "{} samples  pooled std {:.4} mm  99% bounds [{:.4}, {:.4}] mm  total std {:.4} mm",
                result.samples, result.pooled_std_mm, result.bounds_mm[0], result.bounds_mm[1], result.total_std_mm
            );
            repeat::write_report(&result, &out)?;
            Ok(report(result.check(waypoints * reps)))
        }
    }
}
