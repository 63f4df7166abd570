//! Random push candidates for data collection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geom::Vec2;

/// A straight push in normalized workspace coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub start: Vec2,
    pub end: Vec2,
}

impl Sweep {
    pub fn to_mm(&self, workspace_mm: [f64; 2]) -> (Vec2, Vec2) {
        let scale = |p: Vec2| Vec2::new(p.x * workspace_mm[0], p.y * workspace_mm[1]);
        (scale(self.start), scale(self.end))
    }
}

/// Start and end drawn independently and uniformly over the unit square.
/// Zero-length draws are discarded.
pub fn sample_push<R: Rng + ?Sized>(rng: &mut R) -> Sweep {
    loop {
        let start = Vec2::new(rng.random(), rng.random());
        let end = Vec2::new(rng.random(), rng.random());
        if start != end {
            return Sweep { start, end };
        }
    }
}
