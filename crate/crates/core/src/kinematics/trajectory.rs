//! Piecewise-linear XY paths with a trapezoidal speed profile per segment.
//!
//! The carriage comes to rest at every interior waypoint, so the path is
//! traversed as a chain of independent point-to-point moves. Each move
//! accelerates at `a_max` up to `v_max`, cruises, and decelerates; moves too
//! short to reach `v_max` use a triangular profile peaking at
//! `sqrt(a_max * length)`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geom::{Rect, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    /// mm/s
    pub v_max: f64,
    /// mm/s²
    pub a_max: f64,
}

impl Default for MotionProfile {
    fn default() -> Self {
        Self {
            v_max: 100.0,
            a_max: 500.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TrajectoryError {
    #[error("a trajectory needs at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("waypoint {index} lies outside the workspace")]
    OutOfWorkspace { index: usize },
    #[error("waypoint {index} is not finite")]
    NonFinite { index: usize },
    #[error("profile limits must be positive and finite")]
    InvalidProfile,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Ramp {
    length: f64,
    accel: f64,
    v_peak: f64,
    t_ramp: f64,
    t_cruise: f64,
}

impl Ramp {
    fn new(length: f64, profile: MotionProfile) -> Self {
        let accel = profile.a_max;
        if length <= 0.0 {
            return Self {
                length: 0.0,
                accel,
                v_peak: 0.0,
                t_ramp: 0.0,
                t_cruise: 0.0,
            };
        }
        let ramp_pair_distance = profile.v_max * profile.v_max / accel;
        if length >= ramp_pair_distance {
            Self {
                length,
                accel,
                v_peak: profile.v_max,
                t_ramp: profile.v_max / accel,
                t_cruise: (length - ramp_pair_distance) / profile.v_max,
            }
        } else {
            let v_peak = libm::sqrt(accel * length);
            Self {
                length,
                accel,
                v_peak,
                t_ramp: v_peak / accel,
                t_cruise: 0.0,
            }
        }
    }

    fn duration(&self) -> f64 {
        2.0 * self.t_ramp + self.t_cruise
    }

    fn distance_at(&self, t: f64) -> f64 {
        let total = self.duration();
        if t <= 0.0 {
            0.0
        } else if t >= total {
            self.length
        } else if t < self.t_ramp {
            0.5 * self.accel * t * t
        } else if t < self.t_ramp + self.t_cruise {
            0.5 * self.accel * self.t_ramp * self.t_ramp + self.v_peak * (t - self.t_ramp)
        } else {
            let remaining = total - t;
            self.length - 0.5 * self.accel * remaining * remaining
        }
    }

    fn speed_at(&self, t: f64) -> f64 {
        let total = self.duration();
        if t <= 0.0 || t >= total {
            0.0
        } else if t < self.t_ramp {
            self.accel * t
        } else if t < self.t_ramp + self.t_cruise {
            self.v_peak
        } else {
            self.accel * (total - t)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Segment {
    start: Vec2,
    end: Vec2,
    direction: Vec2,
    start_time: f64,
    start_arc: f64,
    ramp: Ramp,
}

/// Time-parameterized XY path in workspace millimeters.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    waypoints: Vec<Vec2>,
    profile: MotionProfile,
    segments: Vec<Segment>,
    duration: f64,
    length: f64,
}

/// Plans a stop-at-every-waypoint trajectory through `waypoints`, all of
/// which must lie inside `bounds`.
pub fn plan_trajectory(
    waypoints: &[Vec2],
    profile: MotionProfile,
    bounds: &Rect,
) -> Result<Trajectory, TrajectoryError> {
    if waypoints.len() < 2 {
        return Err(TrajectoryError::TooFewWaypoints(waypoints.len()));
    }
    let valid = |v: f64| v.is_finite() && v > 0.0;
    if !valid(profile.v_max) || !valid(profile.a_max) {
        return Err(TrajectoryError::InvalidProfile);
    }
    for (index, w) in waypoints.iter().enumerate() {
        if !w.is_finite() {
            return Err(TrajectoryError::NonFinite { index });
        }
        if !bounds.contains(*w) {
            return Err(TrajectoryError::OutOfWorkspace { index });
        }
    }

    let mut segments = Vec::with_capacity(waypoints.len() - 1);
    let mut time = 0.0;
    let mut arc = 0.0;
    for pair in waypoints.windows(2) {
        let (start, end) = (pair[0], pair[1]);
        let delta = end - start;
        let length = delta.norm();
        let ramp = Ramp::new(length, profile);
        segments.push(Segment {
            start,
            end,
            direction: delta.normalized().unwrap_or(Vec2::ZERO),
            start_time: time,
            start_arc: arc,
            ramp,
        });
        time += ramp.duration();
        arc += ramp.length;
    }

    Ok(Trajectory {
        waypoints: waypoints.to_vec(),
        profile,
        segments,
        duration: time,
        length: arc,
    })
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Total path length in millimeters.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn waypoints(&self) -> &[Vec2] {
        &self.waypoints
    }

    pub fn profile(&self) -> MotionProfile {
        self.profile
    }

    pub fn start(&self) -> Vec2 {
        self.waypoints[0]
    }

    pub fn end(&self) -> Vec2 {
        *self.waypoints.last().expect("at least two waypoints")
    }

    /// Highest speed reached on any segment.
    pub fn peak_speed(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.ramp.v_peak)
            .fold(0.0, f64::max)
    }

    fn segment_at(&self, t: f64) -> &Segment {
        let idx = self.segments.partition_point(|s| s.start_time <= t);
        &self.segments[idx.saturating_sub(1)]
    }

    /// Carriage position at time `t`, clamped to `[0, duration]`.
    pub fn sample(&self, t: f64) -> Vec2 {
        if t <= 0.0 {
            return self.start();
        }
        if t >= self.duration {
            return self.end();
        }
        let seg = self.segment_at(t);
        let local = t - seg.start_time;
        if local >= seg.ramp.duration() {
            return seg.end;
        }
        seg.start + seg.direction * seg.ramp.distance_at(local)
    }

    /// Analytic speed at time `t`.
    pub fn speed(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= self.duration {
            return 0.0;
        }
        let seg = self.segment_at(t);
        seg.ramp.speed_at(t - seg.start_time)
    }

    /// Distance travelled along the path by time `t`.
    pub fn arc_length(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.duration {
            return self.length;
        }
        let seg = self.segment_at(t);
        seg.start_arc + seg.ramp.distance_at(t - seg.start_time)
    }
}
