//! Color-threshold rope segmentation.

use alloc::vec;
use alloc::vec::Vec;

use super::render::{CameraModel, Frame, Rgb};
use super::reset::{points_worst_stray, DeviationProbe, NominalLine, Side, Stray};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; (width * height) as usize],
        }
    }

    pub fn get(&self, u: u32, v: u32) -> bool {
        u < self.width && v < self.height && self.bits[(v * self.width + u) as usize]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| (i as u32 % w, i as u32 / w))
    }
}

/// Marks pixels whose Euclidean RGB distance to `target` is below `threshold`.
pub fn segment_color(frame: &Frame, target: Rgb, threshold: f64) -> Mask {
    let limit = threshold * threshold;
    let bits = frame
        .pixels
        .chunks_exact(3)
        .map(|px| {
            let d: f64 = px
                .iter()
                .zip(target)
                .map(|(&a, b)| {
                    let diff = a as f64 - b as f64;
                    diff * diff
                })
                .sum();
            d < limit
        })
        .collect();
    Mask {
        width: frame.width,
        height: frame.height,
        bits,
    }
}

/// A mask together with the camera that produced it, usable for planning
/// resets from images alone.
pub struct MaskProbe<'a> {
    pub mask: &'a Mask,
    pub camera: &'a CameraModel,
}

impl DeviationProbe for MaskProbe<'_> {
    fn worst_stray(&self, line: &NominalLine, s0: f64, s1: f64, side: Side) -> Option<Stray> {
        let points = self
            .mask
            .iter_set()
            .map(|(u, v)| self.camera.to_workspace(u, v));
        points_worst_stray(points, line, s0, s1, side)
    }
}
