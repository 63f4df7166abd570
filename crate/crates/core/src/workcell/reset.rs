//! Combing reset: the rope is swept back onto its nominal line band by
//! band, starting at the anchor, pushing from whichever side it strays to.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::rope::{simulate_push, RopeParams, RopeState};
use crate::geom::{Rect, Vec2};

/// The straight line the rope lies on after a perfect reset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NominalLine {
    pub anchor: Vec2,
    /// Unit direction from the anchor towards the free end.
    pub direction: Vec2,
    pub length: f64,
}

impl NominalLine {
    /// Returns `(s, offset)`: distance along the line and signed
    /// perpendicular offset, positive to the left of `direction`.
    pub fn project(&self, p: Vec2) -> (f64, f64) {
        let d = p - self.anchor;
        (d.dot(self.direction), self.direction.cross(d))
    }

    pub fn deviation(&self, p: Vec2) -> f64 {
        self.project(p).1.abs()
    }

    pub fn max_deviation(&self, points: &[Vec2]) -> f64 {
        points
            .iter()
            .map(|p| self.deviation(*p))
            .fold(0.0, f64::max)
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        self.anchor + self.direction * s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

/// The rope point straying furthest from the line within a band.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stray {
    /// Position along the line.
    pub s: f64,
    pub deviation: f64,
}

/// Something that can report how far the rope strays from the line.
pub trait DeviationProbe {
    /// The furthest point on `side` among rope points whose position along
    /// the line falls in `[s0, s1)`.
    fn worst_stray(&self, line: &NominalLine, s0: f64, s1: f64, side: Side) -> Option<Stray>;
}

/// Shared band/side bookkeeping for probes that see a cloud of points.
pub fn points_worst_stray<I>(points: I, line: &NominalLine, s0: f64, s1: f64, side: Side) -> Option<Stray>
where
    I: IntoIterator<Item = Vec2>,
{
    points
        .into_iter()
        .filter_map(|p| {
            let (s, offset) = line.project(p);
            let inside = s >= s0 && s < s1;
            (inside && offset * side.sign() > 0.0).then_some(Stray {
                s,
                deviation: offset.abs(),
            })
        })
        .max_by(|a, b| a.deviation.total_cmp(&b.deviation))
}

impl DeviationProbe for RopeState {
    fn worst_stray(&self, line: &NominalLine, s0: f64, s1: f64, side: Side) -> Option<Stray> {
        points_worst_stray(self.particles.iter().copied(), line, s0, s1, side)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResetParams {
    pub bands: usize,
    pub max_sweeps: usize,
    /// Sides that stray less than this are left alone.
    pub skip_mm: f64,
    /// Where the gripper center stops, measured from the line.
    pub stop_offset_mm: f64,
    /// Extra room kept between the rope and the gripper at sweep start.
    pub clearance_mm: f64,
}

impl Default for ResetParams {
    fn default() -> Self {
        Self {
            bands: 6,
            max_sweeps: 12,
            skip_mm: 8.0,
            stop_offset_mm: 10.0,
            clearance_mm: 1.0,
        }
    }
}

/// A planned straight gripper sweep in workspace mm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMm {
    pub start: Vec2,
    pub end: Vec2,
}

/// Produces reset sweeps one at a time so that callers can re-observe the
/// rope between sweeps.
#[derive(Clone, Debug)]
pub struct ResetPlanner {
    line: NominalLine,
    params: ResetParams,
    travel: Rect,
    contact_radius: f64,
    cursor: usize,
    issued: usize,
}

impl ResetPlanner {
    /// `travel` bounds the gripper center; `contact_radius` is footprint
    /// plus rope radius.
    pub fn new(line: NominalLine, params: ResetParams, travel: Rect, contact_radius: f64) -> Self {
        Self {
            line,
            params,
            travel,
            contact_radius,
            cursor: 0,
            issued: 0,
        }
    }

    pub fn issued(&self) -> usize {
        self.issued
    }

    fn slot(&self, index: usize) -> (usize, Side) {
        let side = if index.is_multiple_of(2) { Side::Left } else { Side::Right };
        (index / 2, side)
    }

    /// Next sweep to execute, or `None` once the rope is straight enough or
    /// the sweep budget is used up.
    pub fn next_sweep<P: DeviationProbe + ?Sized>(&mut self, probe: &P) -> Option<SweepMm> {
        if self.params.bands == 0 {
            return None;
        }
        let slots = self.params.bands * 2;
        let band_width = self.line.length / self.params.bands as f64;
        for _ in 0..slots {
            if self.issued >= self.params.max_sweeps {
                return None;
            }
            let (band, side) = self.slot(self.cursor);
            self.cursor = (self.cursor + 1) % slots;
            let s0 = if band == 0 { f64::NEG_INFINITY } else { band as f64 * band_width };
            let s1 = if band + 1 == self.params.bands {
                f64::INFINITY
            } else {
                (band + 1) as f64 * band_width
            };
            let Some(stray) = probe.worst_stray(&self.line, s0, s1, side) else {
                continue;
            };
            let deviation = stray.deviation;
            if deviation <= self.params.skip_mm {
                continue;
            }
            let center = self.line.point_at(stray.s);
            let normal = self.line.direction.perp() * side.sign();
            let reach = deviation + self.contact_radius + self.params.clearance_mm;
            let start = self.travel.clamp(center + normal * reach);
            let end = self.travel.clamp(center + normal * self.params.stop_offset_mm);
            if start.distance(end) < 1e-9 {
                continue;
            }
            self.issued += 1;
            return Some(SweepMm { start, end });
        }
        None
    }
}

/// Runs the reset planner against the simulated rope.
pub fn reset_rope(
    rope: &RopeState,
    line: &NominalLine,
    params: &ResetParams,
    travel: Rect,
    footprint_radius: f64,
    rope_params: &RopeParams,
) -> (RopeState, Vec<SweepMm>) {
    let mut planner = ResetPlanner::new(*line, *params, travel, footprint_radius + rope.radius);
    let mut state = rope.clone();
    let mut sweeps = Vec::new();
    while let Some(sweep) = planner.next_sweep(&state) {
        state = simulate_push(&state, sweep.start, sweep.end, footprint_radius, rope_params);
        sweeps.push(sweep);
    }
    (state, sweeps)
}
