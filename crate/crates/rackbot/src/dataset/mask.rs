//! Rope observation from a top camera image.

use rackbot_core::geom::{point_segment_distance, Vec2};
use rackbot_core::workcell::{CameraModel, Mask, View, WorkcellConfig};

use super::layout::decode_frame;

/// Segmented rope pixels of one top image, kept both as a mask (for the
/// reset planner) and as workspace points (for sweep tests).
pub struct RopeMask {
    pub mask: Mask,
    pub camera: CameraModel,
    points: Vec<Vec2>,
}

impl RopeMask {
    pub fn from_jpeg(jpeg: &[u8], workcell: &WorkcellConfig) -> Option<Self> {
        let frame = decode_frame(View::Top, jpeg)?;
        let camera = workcell.camera(View::Top);
        if (frame.width, frame.height) != (camera.width, camera.height) {
            return None;
        }
        let mask = workcell.segment_rope(&frame);
        let points = mask.iter_set().map(|(u, v)| camera.to_workspace(u, v)).collect();
        Some(Self { mask, camera, points })
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same predicate as `mask_intersects_sweep`, iterating over the rope
    /// pixels instead of the swept band.
    pub fn intersects(&self, start: Vec2, end: Vec2, footprint_radius: f64) -> bool {
        self.points
            .iter()
            .any(|&p| point_segment_distance(p, start, end) <= footprint_radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::render_jpeg;
    use crate::cell::CellSim;
    use crate::config::RackConfig;
    use rackbot_core::workcell::mask_intersects_sweep;

    #[test]
    fn agrees_with_band_scan() {
        let mut rack = RackConfig::default();
        rack.server.sensor_noise = 0;
        let cfg = rack.cell(0);
        let wc = cfg.workcell.clone();
        let sim = CellSim::new(cfg, 0.0).unwrap();
        let scene = sim.scene_at(1e9);
        let jpeg = render_jpeg(View::Top, &scene, &wc, 85, None).unwrap();
        let rope = RopeMask::from_jpeg(&jpeg, &wc).unwrap();
        assert!(!rope.is_empty());
        let r = wc.footprint_radius_mm;
        let cases = [
            (Vec2::new(20.0, 100.0), Vec2::new(170.0, 100.0)),
            (Vec2::new(10.0, 10.0), Vec2::new(30.0, 240.0)),
            (Vec2::new(60.0, 200.0), Vec2::new(180.0, 20.0)),
        ];
        for (a, b) in cases {
            assert_eq!(
                rope.intersects(a, b, r),
                mask_intersects_sweep(&rope.mask, &rope.camera, a, b, r)
            );
        }
        assert!(rope.intersects(cases[0].0, cases[0].1, r));
        assert!(!rope.intersects(cases[1].0, cases[1].1, r));
    }
}
