use serde::{Deserialize, Serialize};

/// Actuation noise of one robot.
///
/// Every move draws a fresh zero-mean Gaussian error per affected axis. On
/// top of that each robot carries a systematic offset per axis, drawn once
/// from the `offset_sigma_*` distributions when the robot is built.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub sigma_xy_mm: f64,
    pub sigma_z_mm: f64,
    pub offset_sigma_xy_mm: f64,
    pub offset_sigma_z_mm: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_xy_mm: 0.027,
            sigma_z_mm: 0.109,
            offset_sigma_xy_mm: 0.01,
            offset_sigma_z_mm: 0.05,
            seed: 0,
        }
    }
}

impl NoiseModel {
    /// Perfectly repeatable actuation.
    pub fn none() -> Self {
        Self {
            sigma_xy_mm: 0.0,
            sigma_z_mm: 0.0,
            offset_sigma_xy_mm: 0.0,
            offset_sigma_z_mm: 0.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        let ok = |s: f64| s.is_finite() && s >= 0.0;
        if !ok(self.sigma_xy_mm) || !ok(self.offset_sigma_xy_mm) {
            return Err("xy sigmas must be finite and non-negative");
        }
        if !ok(self.sigma_z_mm) || !ok(self.offset_sigma_z_mm) {
            return Err("z sigmas must be finite and non-negative");
        }
        Ok(())
    }
}
