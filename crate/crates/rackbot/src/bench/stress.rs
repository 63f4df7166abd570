//! Fleet stress test: still images from both cameras of every active robot
//! at a fixed rate, with one more batch of robots per phase.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rackbot_core::stats::{compute_percentiles, mean};
use rackbot_core::workcell::View;
use serde::{Deserialize, Serialize};

use super::telemetry::{Sampler, TelemetrySample};
use super::{ReportError, Target};
use crate::client::RobotClient;
use crate::clock;

#[derive(Clone, Debug)]
pub struct StressConfig {
    /// Requests per second per camera.
    pub fps: f64,
    pub phase_secs: f64,
    /// Active robot count of each phase, ascending.
    pub phases: Vec<usize>,
    pub request_timeout: Duration,
    /// Bytes per second, for the utilization column.
    pub bandwidth_budget: f64,
}

impl StressConfig {
    /// One phase per robot count from 1 to `robots`.
    pub fn ramp(robots: usize) -> Vec<usize> {
        (1..=robots).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub robot: usize,
    pub view: View,
    pub send_ms: f64,
    pub recv_ms: f64,
    pub bytes: u64,
    pub ok: bool,
}

impl LatencySample {
    pub fn latency_ms(&self) -> f64 {
        self.recv_ms - self.send_ms
    }
}

/// An action run once during a phase, e.g. killing a robot.
pub struct Fault {
    pub phase: usize,
    pub at_s: f64,
    pub action: Box<dyn FnOnce() + Send>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotPhaseStats {
    pub robot_id: String,
    pub requests: usize,
    pub errors: usize,
    pub p95_ms: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseReport {
    pub robots: usize,
    pub duration_s: f64,
    pub requests: usize,
    pub errors: usize,
    /// Sum of the payload sizes recorded in successful samples.
    pub sample_bytes: u64,
    /// Bytes counted by the shared receive counter.
    pub counted_bytes: u64,
    pub bytes_per_sec: f64,
    pub budget_utilization: f64,
    pub mean_image_bytes: f64,
    pub latency_mean_ms: f64,
    pub latency_p50_ms: f64,
    pub latency_p95_ms: f64,
    pub latency_max_ms: f64,
    pub cpu_percent: f64,
    pub rss_max_bytes: u64,
    pub telemetry: Vec<TelemetrySample>,
    pub per_robot: Vec<RobotPhaseStats>,
    #[serde(skip)]
    pub samples: Vec<LatencySample>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StressReport {
    pub fps: f64,
    pub phase_secs: f64,
    pub bandwidth_budget: f64,
    pub assumptions: Vec<String>,
    pub phases: Vec<PhaseReport>,
}

fn percentiles_or_nan(latencies: &[f64]) -> (f64, f64, f64, f64) {
    match compute_percentiles(latencies) {
        Ok(p) => (mean(latencies).unwrap_or(f64::NAN), p.p50, p.p95, p.max),
        Err(_) => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
    }
}

/// Issues `count` requests on a fixed schedule. A late request is sent
/// immediately rather than skipped, so the count never depends on latency.
#[allow(clippy::too_many_arguments)]
fn issue(
    target: &Target,
    robot: usize,
    view: View,
    start: Instant,
    period: Duration,
    count: usize,
    timeout: Duration,
    counter: &AtomicU64,
) -> Vec<LatencySample> {
    let client = RobotClient::with_timeout(target.base_url.clone(), target.token.clone(), timeout);
    let mut samples = Vec::with_capacity(count);
    for n in 0..count {
        let due = start + period.mul_f64(n as f64);
        let now = Instant::now();
        if due > now {
            std::thread::sleep(due - now);
        }
        let send_ms = clock::now_ms_f64();
        let result = client.image(view);
        let recv_ms = clock::now_ms_f64();
        let (ok, bytes) = match result {
            Ok(img) => {
                counter.fetch_add(img.jpeg.len() as u64, Ordering::Relaxed);
                (true, img.jpeg.len() as u64)
            }
            Err(_) => (false, 0),
        };
        samples.push(LatencySample {
            robot,
            view,
            send_ms,
            recv_ms,
            bytes,
            ok,
        });
    }
    samples
}

fn run_phase(targets: &[Target], robots: usize, cfg: &StressConfig, fault: Option<Fault>) -> PhaseReport {
    let period = Duration::from_secs_f64(1.0 / cfg.fps);
    let count = (cfg.fps * cfg.phase_secs).round() as usize;
    let counter = AtomicU64::new(0);
    let streams = robots * 2;
    let sampler = Sampler::start(Duration::from_secs(1));
    let start = Instant::now() + Duration::from_millis(50);
    let samples: Vec<LatencySample> = std::thread::scope(|s| {
        if let Some(fault) = fault {
            s.spawn(move || {
                let due = start + Duration::from_secs_f64(fault.at_s);
                std::thread::sleep(due.saturating_duration_since(Instant::now()));
                (fault.action)();
            });
        }
        let handles: Vec<_> = (0..robots)
            .flat_map(|r| View::ALL.into_iter().map(move |v| (r, v)))
            .enumerate()
            .map(|(j, (robot, view))| {
                let target = &targets[robot];
                let counter = &counter;
                // Spread the streams evenly over one period.
                let offset = period.mul_f64(j as f64 / streams as f64);
                s.spawn(move || issue(target, robot, view, start + offset, period, count, cfg.request_timeout, counter))
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    let telemetry = sampler.finish();

    let ok: Vec<&LatencySample> = samples.iter().filter(|s| s.ok).collect();
    let latencies: Vec<f64> = ok.iter().map(|s| s.latency_ms()).collect();
    let (latency_mean_ms, latency_p50_ms, latency_p95_ms, latency_max_ms) = percentiles_or_nan(&latencies);
    let sample_bytes: u64 = ok.iter().map(|s| s.bytes).sum();
    let counted_bytes = counter.load(Ordering::Relaxed);
    let bytes_per_sec = counted_bytes as f64 / cfg.phase_secs;
    let per_robot = (0..robots)
        .map(|r| {
            let mine: Vec<&LatencySample> = samples.iter().filter(|s| s.robot == r).collect();
            let lat: Vec<f64> = mine.iter().filter(|s| s.ok).map(|s| s.latency_ms()).collect();
            RobotPhaseStats {
                robot_id: targets[r].robot_id.clone(),
                requests: mine.len(),
                errors: mine.iter().filter(|s| !s.ok).count(),
                p95_ms: percentiles_or_nan(&lat).2,
            }
        })
        .collect();
    let cpu: Vec<f64> = telemetry.iter().map(|t| t.cpu_percent).collect();
    PhaseReport {
        robots,
        duration_s: cfg.phase_secs,
        requests: samples.len(),
        errors: samples.len() - ok.len(),
        sample_bytes,
        counted_bytes,
        bytes_per_sec,
        budget_utilization: bytes_per_sec / cfg.bandwidth_budget,
        mean_image_bytes: if ok.is_empty() { 0.0 } else { sample_bytes as f64 / ok.len() as f64 },
        latency_mean_ms,
        latency_p50_ms,
        latency_p95_ms,
        latency_max_ms,
        cpu_percent: mean(&cpu).unwrap_or(f64::NAN),
        rss_max_bytes: telemetry.iter().map(|t| t.rss_bytes).max().unwrap_or(0),
        telemetry,
        per_robot,
        samples,
    }
}

/// Runs every phase in order. Unreachable robots produce failed samples;
/// the run continues.
pub fn run_stress(targets: &[Target], cfg: &StressConfig, mut faults: Vec<Fault>) -> Result<StressReport, ReportError> {
    if cfg.phases.is_empty() {
        return Err(ReportError::Empty("no phases requested"));
    }
    if cfg.phases.iter().any(|&k| k == 0 || k > targets.len()) {
        return Err(ReportError::Empty("phase robot count outside 1..=targets"));
    }
    let mut phases = Vec::with_capacity(cfg.phases.len());
    for (i, &robots) in cfg.phases.iter().enumerate() {
        let fault = faults.iter().position(|f| f.phase == i).map(|p| faults.remove(p));
        phases.push(run_phase(targets, robots, cfg, fault));
    }
    Ok(StressReport {
        fps: cfg.fps,
        phase_secs: cfg.phase_secs,
        bandwidth_budget: cfg.bandwidth_budget,
        assumptions: vec![
            format!("phase duration {} s", cfg.phase_secs),
            "latency in milliseconds, nearest-rank percentiles over successful requests".into(),
            "bytes per second counts JPEG payload bytes only".into(),
            "cpu and memory are those of the querying process".into(),
        ],
        phases,
    })
}

pub const CSV_HEADER: [&str; 10] = [
    "robots",
    "requests",
    "errors",
    "bytes_per_sec",
    "budget_utilization",
    "latency_mean_ms",
    "latency_p50_ms",
    "latency_p95_ms",
    "latency_max_ms",
    "cpu_percent",
];

/// Writes `stress.csv` (one row per phase) and `stress_summary.json`.
pub fn write_report(report: &StressReport, dir: &Path) -> Result<(), ReportError> {
    if report.phases.is_empty() {
        return Err(ReportError::Empty("stress report without phases"));
    }
    if report.phases.iter().any(|p| p.requests == 0) {
        return Err(ReportError::Empty("stress phase without requests"));
    }
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("stress.csv"))?;
    w.write_record(CSV_HEADER)?;
    for p in &report.phases {
        w.write_record([
            p.robots.to_string(),
            p.requests.to_string(),
            p.errors.to_string(),
            format!("{:.1}", p.bytes_per_sec),
            format!("{:.6}", p.budget_utilization),
            format!("{:.3}", p.latency_mean_ms),
            format!("{:.3}", p.latency_p50_ms),
            format!("{:.3}", p.latency_p95_ms),
            format!("{:.3}", p.latency_max_ms),
            format!("{:.1}", p.cpu_percent),
        ])?;
    }
    w.flush()?;
    let json = serde_json::to_vec_pretty(report)?;
    std::fs::write(dir.join("stress_summary.json"), json)?;
    Ok(())
}

/// Checks that must hold for a healthy run; returns the failures.
pub fn check(report: &StressReport) -> Vec<String> {
    let mut failures = Vec::new();
    for p in &report.phases {
        let expected = p.robots as f64 * 2.0 * report.fps * report.phase_secs;
        if (p.requests as f64 - expected).abs() > 0.02 * expected {
            failures.push(format!("{} robots: {} requests, expected {expected}", p.robots, p.requests));
        }
        let identity = p.bytes_per_sec * p.duration_s;
        if (identity - p.sample_bytes as f64).abs() > 0.01 * p.sample_bytes.max(1) as f64 {
            failures.push(format!("{} robots: byte accounting off ({identity} vs {})", p.robots, p.sample_bytes));
        }
    }
    if let Some(last) = report.phases.last() {
        if last.errors > 0 {
            failures.push(format!("final phase: {} failed requests", last.errors));
        }
        if !(last.latency_p95_ms < 70.0) {
            failures.push(format!("final phase: p95 {:.1} ms", last.latency_p95_ms));
        }
        if !(last.latency_max_ms < 100.0) {
            failures.push(format!("final phase: max {:.1} ms", last.latency_max_ms));
        }
    }
    failures
}
