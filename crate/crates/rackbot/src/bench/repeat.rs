//! Repeatability protocol: drive through random waypoints, come back to a
//! reference pose and read a simulated dial indicator.

use std::path::Path;
use std::time::Duration;

use rackbot_core::stats::{pooled_std, sample_std, BoxStats};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{ReportError, Target};
use crate::api::CommandRequest;
use crate::client::{ClientError, RobotClient};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProbeAxis {
    Xy,
    Z,
}

pub const REFERENCE: f64 = 0.5;
pub const DIAL_RESOLUTION_MM: f64 = 0.001;

#[derive(Clone, Debug)]
pub struct RepeatConfig {
    pub axis: ProbeAxis,
    pub waypoint_sets: usize,
    /// Waypoints visited before each return to the reference.
    pub waypoints_per_set: usize,
    pub reps: usize,
    pub seed: u64,
    /// Workspace travel in mm, `[x, y, z]`, to convert readings.
    pub travel_mm: [f64; 3],
    /// Injected per-move standard deviation the run should recover.
    pub sigma_mm: f64,
    pub poll: Duration,
    pub idle_timeout: Duration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotSeries {
    pub robot_id: String,
    /// Signed readings in mm; empty if the series was aborted.
    pub deviations_mm: Vec<f64>,
    pub stats: Option<BoxStats>,
    pub aborted: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatabilityReport {
    pub axis: ProbeAxis,
    pub sigma_mm: f64,
    pub samples: usize,
    pub robots: Vec<RobotSeries>,
    /// Within-robot standard deviation pooled over robots.
    pub pooled_std_mm: f64,
    /// Standard deviation of all readings, per-robot offsets included.
    pub total_std_mm: f64,
    /// 99% chi-squared interval for the pooled estimate around `sigma_mm`.
    pub bounds_mm: [f64; 2],
    pub dof: usize,
}

/// Two-sided `level` interval of the sample standard deviation with `dof`
/// degrees of freedom when the true value is `sigma`.
pub fn chi_squared_bounds(sigma: f64, dof: usize, level: f64) -> [f64; 2] {
    let chi = ChiSquared::new(dof as f64).expect("positive dof");
    let tail = (1.0 - level) / 2.0;
    let k = dof as f64;
    [
        sigma * (chi.inverse_cdf(tail) / k).sqrt(),
        sigma * (chi.inverse_cdf(1.0 - tail) / k).sqrt(),
    ]
}

pub fn quantize(mm: f64) -> f64 {
    (mm / DIAL_RESOLUTION_MM).round() * DIAL_RESOLUTION_MM
}

fn send(client: &RobotClient, req: &CommandRequest, cfg: &RepeatConfig) -> Result<(), ClientError> {
    client.command_retrying(req, 3, cfg.poll)?;
    client.wait_idle(cfg.idle_timeout, cfg.poll)?;
    Ok(())
}

fn run_robot(target: &Target, index: usize, cfg: &RepeatConfig) -> RobotSeries {
    let client = target.client();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(index as u64));
    let mut deviations = Vec::with_capacity(cfg.waypoint_sets * cfg.reps);
    let result = (|| -> Result<(), ClientError> {
        client.wait_idle(cfg.idle_timeout, cfg.poll)?;
        for _ in 0..cfg.waypoint_sets {
            let set: Vec<[f64; 2]> = (0..cfg.waypoints_per_set)
                .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
                .collect();
            for _ in 0..cfg.reps {
                let reading = match cfg.axis {
                    ProbeAxis::Xy => {
                        send(&client, &CommandRequest::move_path(&set, REFERENCE, REFERENCE), cfg)?;
                        let pose = client.state()?.pose;
                        (pose.x - REFERENCE) * cfg.travel_mm[0]
                    }
                    ProbeAxis::Z => {
                        for w in &set {
                            send(&client, &CommandRequest::move_z(w[0]), cfg)?;
                        }
                        send(&client, &CommandRequest::move_z(REFERENCE), cfg)?;
                        let pose = client.state()?.pose;
                        (pose.z - REFERENCE) * cfg.travel_mm[2]
                    }
                };
                deviations.push(quantize(reading));
            }
        }
        Ok(())
    })();
    let aborted = result.err().map(|e| e.to_string());
    if aborted.is_some() {
        deviations.clear();
    }
    RobotSeries {
        robot_id: target.robot_id.clone(),
        stats: BoxStats::from_samples(&deviations).ok(),
        deviations_mm: deviations,
        aborted,
    }
}

/// Runs every robot's series concurrently, one thread per robot.
pub fn run_repeatability(targets: &[Target], cfg: &RepeatConfig) -> Result<RepeatabilityReport, ReportError> {
    if targets.is_empty() || cfg.waypoint_sets == 0 || cfg.reps == 0 {
        return Err(ReportError::Empty("repeatability run without robots or repetitions"));
    }
    let robots: Vec<RobotSeries> = std::thread::scope(|s| {
        let handles: Vec<_> = targets
            .iter()
            .enumerate()
            .map(|(i, t)| s.spawn(move || run_robot(t, i, cfg)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let groups: Vec<Vec<f64>> = robots
        .iter()
        .filter(|r| r.aborted.is_none())
        .map(|r| r.deviations_mm.clone())
        .collect();
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(ReportError::Empty("every robot series aborted"));
    }
    let dof = all.len() - groups.len();
    let pooled = pooled_std(&groups).unwrap_or(0.0);
    Ok(RepeatabilityReport {
        axis: cfg.axis,
        sigma_mm: cfg.sigma_mm,
        samples: all.len(),
        pooled_std_mm: pooled,
        total_std_mm: sample_std(&all).unwrap_or(0.0),
        bounds_mm: if dof > 0 { chi_squared_bounds(cfg.sigma_mm, dof, 0.99) } else { [0.0, 0.0] },
        dof,
        robots,
    })
}

impl RepeatabilityReport {
    pub fn check(&self, expected_samples: usize) -> Vec<String> {
        let mut failures = Vec::new();
        for r in &self.robots {
            if let Some(reason) = &r.aborted {
                failures.push(format!("{} aborted: {reason}", r.robot_id));
            } else if r.deviations_mm.len() != expected_samples {
                failures.push(format!("{}: {} samples", r.robot_id, r.deviations_mm.len()));
            }
        }
        if self.sigma_mm == 0.0 {
            if self.robots.iter().flat_map(|r| &r.deviations_mm).any(|d| *d != 0.0) {
                failures.push("nonzero deviation with zero injected noise".into());
            }
        } else if !(self.pooled_std_mm >= self.bounds_mm[0] && self.pooled_std_mm <= self.bounds_mm[1]) {
            failures.push(format!(
                "pooled std {:.4} mm outside [{:.4}, {:.4}]",
                self.pooled_std_mm, self.bounds_mm[0], self.bounds_mm[1]
            ));
        }
        failures
    }
}

/// Writes `repeat_<axis>.csv` (one row per robot) and a JSON summary.
pub fn write_report(report: &RepeatabilityReport, dir: &Path) -> Result<(), ReportError> {
    if report.robots.is_empty() {
        return Err(ReportError::Empty("repeatability report without robots"));
    }
    std::fs::create_dir_all(dir)?;
    let axis = match report.axis {
        ProbeAxis::Xy => "xy",
        ProbeAxis::Z => "z",
    };
    let mut w = csv::Writer::from_path(dir.join(format!("repeat_{axis}.csv")))?;
    w.write_record(["robot_id", "n", "min_mm", "q1_mm", "median_mm", "q3_mm", "max_mm", "mean_mm", "std_mm"])?;
    for r in &report.robots {
        let Some(s) = &r.stats else { continue };
        let f = |v: f64| format!("{v:.4}");
        w.write_record([
            r.robot_id.clone(),
            s.n.to_string(),
            f(s.min),
            f(s.q1),
            f(s.median),
            f(s.q3),
            f(s.max),
            f(s.mean),
            f(s.std),
        ])?;
    }
    w.flush()?;
    std::fs::write(
        dir.join(format!("repeat_{axis}_summary.json")),
        serde_json::to_vec_pretty(report)?,
    )?;
    Ok(())
}
