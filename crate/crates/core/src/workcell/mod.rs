//! Cell contents: the anchored rope, the floor plate and the two cameras.

mod predict;
mod render;
mod reset;
mod rope;
mod segment;

pub use predict::{mask_intersects_sweep, predict_intersection};
pub use render::{render, CameraModel, Frame, Rgb, UnknownView, View, JAW_COLOR};
pub use reset::{
    points_worst_stray, reset_rope, DeviationProbe, NominalLine, ResetParams, ResetPlanner, Side,
    Stray, SweepMm,
};
pub use rope::{simulate_path, simulate_push, Keyframe, PushTrace, RopeParams, RopeState};
pub use segment::{segment_color, Mask, MaskProbe};

use serde::{Deserialize, Serialize};

use crate::geom::{Rect, Vec2};
use crate::kinematics::RobotPose;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorMode {
    #[default]
    Transparent,
    OpaqueInlay,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkcellConfig {
    pub floor_mode: FloorMode,
    pub cell_dimensions_mm: [f64; 3],
    /// XY travel of the gripper center; must match the arm.
    pub workspace_mm: [f64; 2],
    pub lighting: f64,
    pub rope_color: Rgb,
    pub floor_color: Rgb,
    pub gripper_color: Rgb,
    pub footprint_radius_mm: f64,
    pub segmentation_threshold: f64,
    /// The gripper touches the floor plate at or below this normalized height.
    pub contact_height: f64,
    /// Gap between the rope area and the reach of the gripper.
    pub rope_clearance_mm: f64,
    /// Set to false to run the cell without a rope.
    pub rope_present: bool,
    pub rope: RopeParams,
    pub reset: ResetParams,
}

impl Default for WorkcellConfig {
    fn default() -> Self {
        Self {
            floor_mode: FloorMode::Transparent,
            cell_dimensions_mm: [274.0, 356.0, 400.0],
            workspace_mm: [190.0, 250.0],
            lighting: 1.0,
            rope_color: [20, 60, 200],
            floor_color: [235, 235, 235],
            gripper_color: [60, 60, 60],
            footprint_radius_mm: 12.0,
            segmentation_threshold: 60.0,
            contact_height: 0.05,
            rope_clearance_mm: 1.0,
            rope_present: true,
            rope: RopeParams::default(),
            reset: ResetParams::default(),
        }
    }
}

impl WorkcellConfig {
    pub fn travel(&self) -> Rect {
        Rect::from_size(self.workspace_mm[0], self.workspace_mm[1])
    }

    pub fn contact_radius(&self) -> f64 {
        self.footprint_radius_mm + self.rope.radius_mm
    }

    /// Area the rope centerline is confined to. It is inset from the
    /// travel by more than the contact radius so the gripper can always be
    /// placed beyond any particle without touching it.
    pub fn rope_area(&self) -> Rect {
        self.travel().inflate(-(self.contact_radius() + self.rope_clearance_mm))
    }

    /// Visible floor plate: the travel grown by the gripper footprint.
    pub fn floor(&self) -> Rect {
        self.travel().inflate(self.footprint_radius_mm)
    }

    /// The rope is fixed at the middle of the near floor edge and lies
    /// along +Y when straight.
    pub fn nominal_line(&self) -> NominalLine {
        let area = self.rope_area();
        NominalLine {
            anchor: Vec2::new(area.center().x, area.min.y),
            direction: Vec2::new(0.0, 1.0),
            length: self.rope.length_mm,
        }
    }

    pub fn initial_rope(&self) -> Option<RopeState> {
        self.rope_present.then(|| {
            let line = self.nominal_line();
            RopeState::straight(&self.rope, line.anchor, line.direction, self.rope_area())
        })
    }

    pub fn camera(&self, view: View) -> CameraModel {
        CameraModel::fit(view, &self.floor())
    }

    pub fn pose_xy_mm(&self, pose: &RobotPose) -> Vec2 {
        Vec2::new(pose.x * self.workspace_mm[0], pose.y * self.workspace_mm[1])
    }

    pub fn lit_rope_color(&self) -> Rgb {
        self.rope_color
            .map(|c| libm::round((c as f64 * self.lighting).clamp(0.0, 255.0)) as u8)
    }

    pub fn segment_rope(&self, frame: &Frame) -> Mask {
        segment_color(frame, self.lit_rope_color(), self.segmentation_threshold)
    }

    pub fn reset_planner(&self) -> ResetPlanner {
        ResetPlanner::new(self.nominal_line(), self.reset, self.travel(), self.contact_radius())
    }

    pub fn reset_rope(&self, rope: &RopeState) -> (RopeState, alloc::vec::Vec<SweepMm>) {
        reset_rope(
            rope,
            &self.nominal_line(),
            &self.reset,
            self.travel(),
            self.footprint_radius_mm,
            &self.rope,
        )
    }

    pub fn push(&self, rope: &RopeState, start: Vec2, end: Vec2) -> RopeState {
        simulate_push(rope, start, end, self.footprint_radius_mm, &self.rope)
    }

    pub fn predict(&self, rope: &RopeState, start: Vec2, end: Vec2) -> bool {
        predict_intersection(rope, start, end, self.footprint_radius_mm)
    }
}
