//! Flat-shaded orthographic rendering of the two cell cameras.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::rope::RopeState;
use super::{FloorMode, WorkcellConfig};
use crate::geom::{point_segment_distance, Rect, Vec2};
use crate::kinematics::RobotPose;

pub type Rgb = [u8; 3];

pub const JAW_COLOR: Rgb = [230, 200, 40];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Top,
    Bottom,
}

impl View {
    pub const ALL: [View; 2] = [View::Top, View::Bottom];

    pub fn as_str(self) -> &'static str {
        match self {
            View::Top => "top",
            View::Bottom => "bottom",
        }
    }

    pub fn resolution(self) -> (u32, u32) {
        match self {
            View::Top => (1280, 720),
            View::Bottom => (640, 480),
        }
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnknownView;

impl fmt::Display for UnknownView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("view must be \"top\" or \"bottom\"")
    }
}

impl FromStr for View {
    type Err = UnknownView;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "top" => Ok(View::Top),
            "bottom" => Ok(View::Bottom),
            _ => Err(UnknownView),
        }
    }
}

/// RGB raster, row major, 3 bytes per pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub view: View,
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
    pub timestamp_ms: u64,
    pub sequence: u64,
}

impl Frame {
    pub fn filled(view: View, color: Rgb) -> Self {
        let (width, height) = view.resolution();
        let mut pixels = vec![0u8; (width * height * 3) as usize];
        for px in pixels.chunks_exact_mut(3) {
            px.copy_from_slice(&color);
        }
        Self {
            view,
            width,
            height,
            pixels,
            timestamp_ms: 0,
            sequence: 0,
        }
    }

    pub fn pixel(&self, u: u32, v: u32) -> Rgb {
        let i = ((v * self.width + u) * 3) as usize;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    fn put(&mut self, u: u32, v: u32, color: Rgb) {
        let i = ((v * self.width + u) * 3) as usize;
        self.pixels[i..i + 3].copy_from_slice(&color);
    }
}

/// Orthographic camera looking straight at the floor plate. Image columns
/// run along workspace Y and rows along workspace X; the bottom camera sees
/// the scene mirrored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub view: View,
    pub width: u32,
    pub height: u32,
    /// Pixels per mm.
    pub scale: f64,
    /// Workspace point imaged at the raster center.
    pub center: Vec2,
    pub mirrored: bool,
}

impl CameraModel {
    /// Fits `floor` into the raster of `view`, leaving a small margin.
    pub fn fit(view: View, floor: &Rect) -> Self {
        let (width, height) = view.resolution();
        let scale = 0.97 * (width as f64 / floor.height()).min(height as f64 / floor.width());
        Self {
            view,
            width,
            height,
            scale,
            center: floor.center(),
            mirrored: view == View::Bottom,
        }
    }

    /// Continuous image coordinates `(u, v)` of a workspace point.
    pub fn to_pixel(&self, p: Vec2) -> (f64, f64) {
        let du = (p.y - self.center.y) * self.scale;
        let dv = (p.x - self.center.x) * self.scale;
        let u = if self.mirrored { -du } else { du };
        (self.width as f64 / 2.0 + u, self.height as f64 / 2.0 + dv)
    }

    /// Workspace point seen at the center of pixel `(u, v)`.
    pub fn to_workspace(&self, u: u32, v: u32) -> Vec2 {
        let du = (u as f64 + 0.5 - self.width as f64 / 2.0) / self.scale;
        let dv = (v as f64 + 0.5 - self.height as f64 / 2.0) / self.scale;
        let du = if self.mirrored { -du } else { du };
        Vec2::new(self.center.x + dv, self.center.y + du)
    }

    /// Synthetic pinhole-style intrinsics for an orthographic camera.
    pub fn intrinsics(&self) -> [[f64; 3]; 3] {
        let fx = if self.mirrored { -self.scale } else { self.scale };
        [
            [fx, 0.0, self.width as f64 / 2.0],
            [0.0, self.scale, self.height as f64 / 2.0],
            [0.0, 0.0, 1.0],
        ]
    }

    /// Inclusive pixel bounding box of a workspace disc, clipped to the raster.
    fn pixel_bounds(&self, a: Vec2, b: Vec2, radius: f64) -> Option<(u32, u32, u32, u32)> {
        let (ua, va) = self.to_pixel(a);
        let (ub, vb) = self.to_pixel(b);
        let r = radius * self.scale + 1.0;
        let u0 = libm::floor(ua.min(ub) - r).max(0.0);
        let v0 = libm::floor(va.min(vb) - r).max(0.0);
        let u1 = libm::ceil(ua.max(ub) + r).min(self.width as f64 - 1.0);
        let v1 = libm::ceil(va.max(vb) + r).min(self.height as f64 - 1.0);
        (u0 <= u1 && v0 <= v1).then_some((u0 as u32, v0 as u32, u1 as u32, v1 as u32))
    }

    /// Calls `f` for every pixel whose center lies within `radius` of the
    /// segment `a -> b`.
    pub fn for_each_in_capsule(&self, a: Vec2, b: Vec2, radius: f64, mut f: impl FnMut(u32, u32)) {
        let Some((u0, v0, u1, v1)) = self.pixel_bounds(a, b, radius) else {
            return;
        };
        for v in v0..=v1 {
            for u in u0..=u1 {
                if point_segment_distance(self.to_workspace(u, v), a, b) <= radius {
                    f(u, v);
                }
            }
        }
    }
}

fn shade(color: Rgb, lighting: f64) -> Rgb {
    color.map(|c| libm::round((c as f64 * lighting).clamp(0.0, 255.0)) as u8)
}

fn fill_capsule(frame: &mut Frame, cam: &CameraModel, a: Vec2, b: Vec2, radius: f64, color: Rgb) {
    let mut hits = Vec::new();
    cam.for_each_in_capsule(a, b, radius, |u, v| hits.push((u, v)));
    for (u, v) in hits {
        frame.put(u, v, color);
    }
}

fn draw_rope(frame: &mut Frame, cam: &CameraModel, rope: &RopeState, color: Rgb) {
    for w in rope.particles.windows(2) {
        fill_capsule(frame, cam, w[0], w[1], rope.radius, color);
    }
}

fn draw_gripper(frame: &mut Frame, cam: &CameraModel, pose: &RobotPose, cfg: &WorkcellConfig) {
    let lit = |c| shade(c, cfg.lighting);
    let center = cfg.pose_xy_mm(pose);
    let radius = cfg.footprint_radius_mm;
    fill_capsule(frame, cam, center, center, radius, lit(cfg.gripper_color));
    let angle = pose.r.to_radians();
    let dir = Vec2::new(libm::cos(angle), libm::sin(angle));
    let tick = cfg.gripper_color.map(|c| c / 3);
    fill_capsule(frame, cam, center, center + dir * (radius * 0.9), 0.8, lit(tick));
    let jaw_offset = 2.0 + 6.0 * pose.d;
    for sign in [-1.0, 1.0] {
        let jaw = center + dir.perp() * (sign * jaw_offset);
        fill_capsule(frame, cam, jaw, jaw, 1.5, lit(JAW_COLOR));
    }
}

/// Renders one camera view of the cell.
pub fn render(view: View, pose: &RobotPose, rope: Option<&RopeState>, cfg: &WorkcellConfig) -> Frame {
    let floor = shade(cfg.floor_color, cfg.lighting);
    let mut frame = Frame::filled(view, floor);
    if view == View::Bottom && cfg.floor_mode == FloorMode::OpaqueInlay {
        return frame;
    }
    let cam = cfg.camera(view);
    let rope_color = shade(cfg.rope_color, cfg.lighting);
    match view {
        View::Top => {
            if let Some(rope) = rope {
                draw_rope(&mut frame, &cam, rope, rope_color);
            }
            draw_gripper(&mut frame, &cam, pose, cfg);
        }
        View::Bottom => {
            // seen from below, the rope lies between the camera and the gripper
            draw_gripper(&mut frame, &cam, pose, cfg);
            if let Some(rope) = rope {
                draw_rope(&mut frame, &cam, rope, rope_color);
            }
        }
    }
    frame
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn camera_round_trip() {
        let cfg = WorkcellConfig::default();
        for view in View::ALL {
            let cam = cfg.camera(view);
            let p = cam.to_workspace(100, 200);
            let (u, v) = cam.to_pixel(p);
            assert!((u - 100.5).abs() < 1e-9 && (v - 200.5).abs() < 1e-9);
        }
    }

    #[test]
    fn view_parsing() {
        assert_eq!("top".parse::<View>(), Ok(View::Top));
        assert_eq!("side".parse::<View>(), Err(UnknownView));
    }
}
