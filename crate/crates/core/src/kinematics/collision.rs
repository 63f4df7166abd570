//! Stall detection from sampled motor current.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::arm::{Axis, RobotPose};

/// Normalized motor current model. A freely running axis draws
/// `free_running`; a stalled one draws `stall`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurrentModel {
    pub free_running: f64,
    pub stall: f64,
    pub threshold: f64,
    pub debounce: usize,
    pub sample_rate_hz: f64,
}

impl Default for CurrentModel {
    fn default() -> Self {
        Self {
            free_running: 0.3,
            stall: 1.0,
            threshold: 0.8,
            debounce: 3,
            sample_rate_hz: 1000.0,
        }
    }
}

impl CurrentModel {
    /// Current trace of a move that runs freely for `free_samples` and then
    /// stalls until the detector has had a chance to trip.
    pub fn stall_trace(&self, free_samples: usize) -> Vec<f64> {
        let mut trace = Vec::with_capacity(free_samples + self.debounce);
        trace.resize(free_samples, self.free_running);
        trace.resize(free_samples + self.debounce.max(1), self.stall);
        trace
    }

    pub fn free_trace(&self, samples: usize) -> Vec<f64> {
        alloc::vec![self.free_running; samples]
    }
}

/// Index of the sample at which the current has exceeded `threshold` for
/// `debounce` consecutive samples, or `None` if it never does.
///
/// # Panics
///
/// If `threshold` is not positive or `debounce` is zero.
pub fn detect_collision(trace: &[f64], threshold: f64, debounce: usize) -> Option<usize> {
    assert!(threshold > 0.0, "current threshold must be positive");
    assert!(debounce > 0, "debounce window must be at least one sample");
    let mut run = 0;
    for (i, &sample) in trace.iter().enumerate() {
        if sample > threshold {
            run += 1;
            if run >= debounce {
                return Some(i);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// An axis stalled against a wall or obstacle and motion was halted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub axis: Axis,
    pub current_peak: f64,
    pub pose_at_stop: RobotPose,
    /// Simulated seconds since the robot was created.
    pub timestamp: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn below_threshold() {
        assert_eq!(detect_collision(&[0.3; 50], 0.8, 3), None);
    }

    #[test]
    fn stall_trips_after_debounce() {
        assert_eq!(detect_collision(&[0.3, 1.0, 1.0, 1.0], 0.8, 3), Some(3));
    }

    #[test]
    fn single_spike_is_rejected() {
        assert_eq!(detect_collision(&[0.3, 1.0, 0.3, 0.3], 0.8, 3), None);
    }

    #[test]
    fn synthesized_traces() {
        let m = CurrentModel::default();
        assert_eq!(detect_collision(&m.free_trace(1000), m.threshold, m.debounce), None);
        let trace = m.stall_trace(10);
        assert_eq!(detect_collision(&trace, m.threshold, m.debounce), Some(12));
        assert!(m.free_running <= 0.4);
    }
}
