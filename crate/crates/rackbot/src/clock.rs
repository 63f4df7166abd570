//! Process-wide monotonic clock in milliseconds, anchored to the Unix epoch
//! at first use so timestamps from different processes are comparable.

use std::sync::OnceLock;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

struct Anchor {
    instant: Instant,
    unix_ms: f64,
}

fn anchor() -> &'static Anchor {
    static ANCHOR: OnceLock<Anchor> = OnceLock::new();
    ANCHOR.get_or_init(|| Anchor {
        instant: Instant::now(),
        unix_ms: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64() * 1000.0)
            .unwrap_or(0.0)
            .floor(),
    })
}

/// Milliseconds, fractional.
pub fn now_ms_f64() -> f64 {
    let a = anchor();
    a.unix_ms + a.instant.elapsed().as_secs_f64() * 1000.0
}

pub fn now_ms() -> u64 {
    now_ms_f64() as u64
}

/// Converts an `Instant` into the same timebase.
pub fn instant_ms(t: Instant) -> f64 {
    let a = anchor();
    match t.checked_duration_since(a.instant) {
        Some(d) => a.unix_ms + d.as_secs_f64() * 1000.0,
        None => a.unix_ms - a.instant.duration_since(t).as_secs_f64() * 1000.0,
    }
}
