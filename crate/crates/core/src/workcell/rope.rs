//! Anchored rope as a quasi-static chain of particles with distance
//! constraints, pushed around by the lowered gripper.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geom::{Rect, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RopeParams {
    pub particles: usize,
    pub length_mm: f64,
    pub radius_mm: f64,
    /// Distance the gripper advances between constraint solves.
    pub substep_mm: f64,
    pub iterations: usize,
    /// Allowed relative stretch of any link after settling.
    pub tolerance: f64,
}

impl Default for RopeParams {
    fn default() -> Self {
        Self {
            particles: 40,
            length_mm: 150.0,
            radius_mm: 2.5,
            substep_mm: 0.5,
            iterations: 20,
            tolerance: 0.02,
        }
    }
}

/// Particle 0 is the anchor and never moves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RopeState {
    pub particles: Vec<Vec2>,
    pub rest_length: f64,
    pub radius: f64,
    /// Floor area the particles are confined to.
    pub bounds: Rect,
}

impl RopeState {
    /// A straight rope starting at `anchor` and running along `direction`.
    pub fn straight(params: &RopeParams, anchor: Vec2, direction: Vec2, bounds: Rect) -> Self {
        assert!(params.particles >= 2, "a rope needs at least two particles");
        let dir = direction.normalized().expect("rope direction must be non-zero");
        let rest_length = params.length_mm / (params.particles - 1) as f64;
        let particles = (0..params.particles)
            .map(|i| bounds.clamp(anchor + dir * (rest_length * i as f64)))
            .collect();
        Self {
            particles,
            rest_length,
            radius: params.radius_mm,
            bounds,
        }
    }

    pub fn anchor(&self) -> Vec2 {
        self.particles[0]
    }

    /// Largest relative deviation of any link from the rest length.
    pub fn max_strain(&self) -> f64 {
        self.particles
            .windows(2)
            .map(|w| (w[0].distance(w[1]) / self.rest_length - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_contained(&self) -> bool {
        self.particles.iter().all(|p| self.bounds.contains(*p))
    }

    /// Relaxes all links towards the rest length, anchor pinned.
    fn solve_constraints(&mut self, iterations: usize) {
        let rest = self.rest_length;
        for _ in 0..iterations {
            for i in 0..self.particles.len() - 1 {
                let (a, b) = (self.particles[i], self.particles[i + 1]);
                let delta = b - a;
                let dist = delta.norm();
                if dist < 1e-12 {
                    continue;
                }
                let correction = delta * ((dist - rest) / dist);
                if i == 0 {
                    self.particles[1] -= correction;
                } else {
                    self.particles[i] += correction * 0.5;
                    self.particles[i + 1] -= correction * 0.5;
                }
            }
        }
    }

    /// Pushes particles out of the disc; returns whether any was inside.
    fn project_out_of_disc(&mut self, center: Vec2, radius: f64, fallback: Vec2) -> bool {
        let mut hit = false;
        for p in self.particles.iter_mut().skip(1) {
            let d = *p - center;
            if d.norm_sq() < radius * radius {
                let dir = d.normalized().unwrap_or(fallback);
                *p = center + dir * radius;
                hit = true;
            }
        }
        hit
    }

    fn clamp_to_bounds(&mut self) {
        let bounds = self.bounds;
        for p in self.particles.iter_mut().skip(1) {
            *p = bounds.clamp(*p);
        }
    }

    /// Follow-the-leader pass from the anchor outwards that restores every
    /// link to its rest length while keeping particles on the floor.
    fn settle(&mut self) {
        let rest = self.rest_length;
        let mut last_dir = Vec2::new(0.0, 1.0);
        for i in 1..self.particles.len() {
            let prev = self.particles[i - 1];
            let dir = (self.particles[i] - prev).normalized().unwrap_or(last_dir);
            let target = prev + dir * rest;
            self.particles[i] = if self.bounds.contains(target) {
                target
            } else {
                slide_along_wall(&self.bounds, prev, rest, target)
            };
            last_dir = dir;
        }
    }
}

/// Point on the boundary of `bounds` at distance `radius` from `center`
/// closest to `target`, falling back to clamping.
fn slide_along_wall(bounds: &Rect, center: Vec2, radius: f64, target: Vec2) -> Vec2 {
    let mut best: Option<(f64, Vec2)> = None;
    let mut consider = |q: Vec2| {
        let q = bounds.clamp(q);
        let d = q.distance(target);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, q));
        }
    };
    for x in [bounds.min.x, bounds.max.x] {
        let h = radius * radius - (x - center.x) * (x - center.x);
        if h >= 0.0 {
            let dy = libm::sqrt(h);
            for y in [center.y + dy, center.y - dy] {
                if y >= bounds.min.y && y <= bounds.max.y {
                    consider(Vec2::new(x, y));
                }
            }
        }
    }
    for y in [bounds.min.y, bounds.max.y] {
        let h = radius * radius - (y - center.y) * (y - center.y);
        if h >= 0.0 {
            let dx = libm::sqrt(h);
            for x in [center.x + dx, center.x - dx] {
                if x >= bounds.min.x && x <= bounds.max.x {
                    consider(Vec2::new(x, y));
                }
            }
        }
    }
    best.map_or_else(|| bounds.clamp(target), |(_, q)| q)
}

/// Rope snapshot at a given distance travelled by the gripper.
#[derive(Clone, Debug, PartialEq)]
pub struct Keyframe {
    pub arc_mm: f64,
    pub particles: Vec<Vec2>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PushTrace {
    pub state: RopeState,
    /// Whether the gripper touched the rope at all.
    pub contact: bool,
    pub keyframes: Vec<Keyframe>,
}

/// Drags a disc of `footprint_radius` along the polyline `path`.
///
/// Particles closer than footprint plus rope radius are projected onto the
/// contact circle every substep, followed by constraint relaxation. A path
/// that never touches the rope returns the input unchanged. When
/// `keyframe_mm` is set, intermediate rope shapes are recorded at roughly
/// that spacing while the rope is being moved.
pub fn simulate_path(
    rope: &RopeState,
    path: &[Vec2],
    footprint_radius: f64,
    params: &RopeParams,
    keyframe_mm: Option<f64>,
) -> PushTrace {
    assert!(footprint_radius > 0.0, "footprint radius must be positive");
    assert!(params.substep_mm > 0.0, "substep must be positive");
    let radius = footprint_radius + rope.radius;
    let mut state = rope.clone();
    let mut keyframes = Vec::new();
    let mut contact = false;
    let mut since_keyframe = false;
    let mut last_keyframe_arc = 0.0;
    let mut arc = 0.0;

    let mut step = |state: &mut RopeState, center: Vec2, dir: Vec2, arc: f64| {
        if state.project_out_of_disc(center, radius, dir.perp()) {
            state.solve_constraints(params.iterations);
            state.project_out_of_disc(center, radius, dir.perp());
            state.clamp_to_bounds();
            contact = true;
            since_keyframe = true;
        }
        if let Some(spacing) = keyframe_mm {
            if since_keyframe && arc - last_keyframe_arc >= spacing {
                keyframes.push(Keyframe {
                    arc_mm: arc,
                    particles: state.particles.clone(),
                });
                last_keyframe_arc = arc;
                since_keyframe = false;
            }
        }
    };

    let Some(&first) = path.first() else {
        return PushTrace {
            state,
            contact: false,
            keyframes,
        };
    };
    let first_dir = path
        .windows(2)
        .find_map(|w| (w[1] - w[0]).normalized())
        .unwrap_or(Vec2::new(1.0, 0.0));
    step(&mut state, first, first_dir, 0.0);
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        let length = a.distance(b);
        let Some(dir) = (b - a).normalized() else {
            continue;
        };
        let n = libm::ceil(length / params.substep_mm).max(1.0) as usize;
        for j in 1..=n {
            let t = j as f64 / n as f64;
            step(&mut state, a.lerp(b, t), dir, arc + length * t);
        }
        arc += length;
    }

    if contact {
        state.settle();
        if keyframe_mm.is_some() {
            if keyframes.last().is_some_and(|k| k.arc_mm >= arc) {
                keyframes.pop();
            }
            keyframes.push(Keyframe {
                arc_mm: arc,
                particles: state.particles.clone(),
            });
        }
    }
    PushTrace {
        state,
        contact,
        keyframes,
    }
}

/// A single straight push from `start` to `end`.
pub fn simulate_push(
    rope: &RopeState,
    start: Vec2,
    end: Vec2,
    footprint_radius: f64,
    params: &RopeParams,
) -> RopeState {
    simulate_path(rope, &[start, end], footprint_radius, params, None).state
}

#[cfg(test)]
mod tests {
    use super::*;

    fn floor() -> Rect {
        Rect::from_size(190.0, 250.0).inflate(-15.5)
    }

    fn horizontal_rope() -> RopeState {
        RopeState::straight(
            &RopeParams::default(),
            Vec2::new(20.0, 100.0),
            Vec2::new(1.0, 0.0),
            floor(),
        )
    }

    #[test]
    fn straight_rope_geometry() {
        let rope = horizontal_rope();
        assert_eq!(rope.particles.len(), 40);
        assert!(rope.max_strain() < 1e-12);
        let end = *rope.particles.last().unwrap();
        assert!((end.x - 170.0).abs() < 1e-9);
    }

    #[test]
    fn distant_sweep_leaves_rope_untouched() {
        let rope = horizontal_rope();
        let out = simulate_push(
            &rope,
            Vec2::new(10.0, 10.0),
            Vec2::new(180.0, 10.0),
            12.0,
            &RopeParams::default(),
        );
        assert_eq!(out, rope);
    }

    #[test]
    fn perpendicular_push_displaces_midpoint() {
        let rope = horizontal_rope();
        let mid = rope.particles[20];
        // disc reaches 20 mm past the rope line
        let out = simulate_push(
            &rope,
            Vec2::new(mid.x, mid.y - 40.0),
            Vec2::new(mid.x, mid.y + 20.0),
            12.0,
            &RopeParams::default(),
        );
        assert!(out.particles[20].y - mid.y >= 8.0);
        assert_eq!(out.anchor(), rope.anchor());
        assert!(out.max_strain() <= 0.02);
        assert!(out.is_contained());
    }

    #[test]
    fn push_into_wall_keeps_rope_on_floor() {
        let rope = horizontal_rope();
        let out = simulate_push(
            &rope,
            Vec2::new(120.0, 80.0),
            Vec2::new(120.0, 250.0),
            12.0,
            &RopeParams::default(),
        );
        assert!(out.is_contained());
        assert!(out.max_strain() <= 0.02);
    }

    #[test]
    fn keyframes_track_progress() {
        let rope = horizontal_rope();
        let trace = simulate_path(
            &rope,
            &[Vec2::new(95.0, 60.0), Vec2::new(95.0, 140.0)],
            12.0,
            &RopeParams::default(),
            Some(2.0),
        );
        assert!(trace.contact);
        assert!(trace.keyframes.len() > 5);
        assert!(trace.keyframes.windows(2).all(|w| w[0].arc_mm < w[1].arc_mm));
        assert_eq!(trace.keyframes.last().unwrap().particles, trace.state.particles);
    }
}
