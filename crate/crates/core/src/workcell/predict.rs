//! Will a straight push touch the rope?

use super::render::CameraModel;
use super::rope::RopeState;
use super::segment::Mask;
use crate::geom::{segment_segment_distance, Vec2};

/// Geometric test: the sweep dilated by footprint plus rope radius reaches
/// some segment of the rope polyline.
pub fn predict_intersection(rope: &RopeState, start: Vec2, end: Vec2, footprint_radius: f64) -> bool {
    let reach = footprint_radius + rope.radius;
    rope.particles
        .windows(2)
        .any(|w| segment_segment_distance(start, end, w[0], w[1]) <= reach)
}

/// Image-space test: some rope pixel lies under the band swept by the
/// gripper footprint.
pub fn mask_intersects_sweep(
    mask: &Mask,
    camera: &CameraModel,
    start: Vec2,
    end: Vec2,
    footprint_radius: f64,
) -> bool {
    let mut hit = false;
    camera.for_each_in_capsule(start, end, footprint_radius, |u, v| {
        hit |= mask.get(u, v);
    });
    hit
}
