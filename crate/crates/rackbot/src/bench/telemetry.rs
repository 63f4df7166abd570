//! CPU and memory of the current process, from procfs.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

const CLOCK_TICKS_PER_S: f64 = 100.0;
const PAGE_BYTES: u64 = 4096;

/// User plus system CPU seconds consumed so far.
pub fn cpu_seconds() -> Option<f64> {
    let stat = std::fs::read_to_string("/proc/self/stat").ok()?;
    // Fields after the parenthesised command name; utime and stime are
    // fields 14 and 15 of the full line.
    let rest = &stat[stat.rfind(')')? + 2..];
    let fields: Vec<&str> = rest.split_whitespace().collect();
    let utime: f64 = fields.get(11)?.parse().ok()?;
    let stime: f64 = fields.get(12)?.parse().ok()?;
    Some((utime + stime) / CLOCK_TICKS_PER_S)
}

pub fn rss_bytes() -> Option<u64> {
    let statm = std::fs::read_to_string("/proc/self/statm").ok()?;
    let pages: u64 = statm.split_whitespace().nth(1)?.parse().ok()?;
    Some(pages * PAGE_BYTES)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub elapsed_s: f64,
    /// Percent of one core over the preceding interval.
    pub cpu_percent: f64,
    pub rss_bytes: u64,
}

/// Samples the process at a fixed interval until stopped.
pub struct Sampler {
    stop: Arc<AtomicBool>,
    handle: JoinHandle<Vec<TelemetrySample>>,
}

impl Sampler {
    pub fn start(interval: Duration) -> Self {
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let handle = std::thread::spawn(move || {
            let start = Instant::now();
            let mut samples = Vec::new();
            let mut last = (Instant::now(), cpu_seconds().unwrap_or(0.0));
            while !flag.load(Ordering::Relaxed) {
                std::thread::sleep(interval.min(Duration::from_millis(100)));
                if last.0.elapsed() < interval {
                    continue;
                }
                let now = (Instant::now(), cpu_seconds().unwrap_or(0.0));
                let wall = now.0.duration_since(last.0).as_secs_f64();
                samples.push(TelemetrySample {
                    elapsed_s: start.elapsed().as_secs_f64(),
                    cpu_percent: 100.0 * (now.1 - last.1) / wall,
                    rss_bytes: rss_bytes().unwrap_or(0),
                });
                last = now;
            }
            samples
        });
        Self { stop, handle }
    }

    pub fn finish(self) -> Vec<TelemetrySample> {
        self.stop.store(true, Ordering::Relaxed);
        self.handle.join().unwrap_or_default()
    }
}
