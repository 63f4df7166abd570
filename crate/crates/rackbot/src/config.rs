//! Rack configuration file (TOML).

use std::path::Path;

use rackbot_core::geom::Rect;
use rackbot_core::kinematics::{ArmConfig, CurrentModel, MotionProfile, NoiseModel, ServoRates};
use rackbot_core::workcell::WorkcellConfig;
use serde::{Deserialize, Serialize};

/// 10 Gbit/s uplink, in bytes per second.
pub const DEFAULT_BANDWIDTH_BUDGET: f64 = 10e9 / 8.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deployment {
    /// Every cell on one shared runtime in the orchestrator process.
    #[default]
    Threads,
    /// One child process per cell.
    Processes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KinematicsSection {
    pub steps_per_mm: f64,
    pub workspace_mm: [f64; 2],
    pub z_travel_mm: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub sigma_xy_mm: f64,
    pub sigma_z_mm: f64,
    pub offset_sigma_xy_mm: f64,
    pub offset_sigma_z_mm: f64,
    pub current_threshold: f64,
    pub servo: ServoRates,
    pub obstacles: Vec<Rect>,
}

impl Default for KinematicsSection {
    fn default() -> Self {
        let arm = ArmConfig::default();
        let noise = NoiseModel::default();
        Self {
            steps_per_mm: arm.steps_per_mm,
            workspace_mm: arm.workspace_mm,
            z_travel_mm: arm.z_travel_mm,
            v_max: arm.profile.v_max,
            a_max: arm.profile.a_max,
            sigma_xy_mm: noise.sigma_xy_mm,
            sigma_z_mm: noise.sigma_z_mm,
            offset_sigma_xy_mm: noise.offset_sigma_xy_mm,
            offset_sigma_z_mm: noise.offset_sigma_z_mm,
            current_threshold: arm.current.threshold,
            servo: arm.servo,
            obstacles: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    /// Simulated seconds per wall-clock second.
    pub time_scale: f64,
    pub stream_fps: f64,
    /// Still images younger than this are served from cache.
    pub frame_cache_ms: f64,
    pub jpeg_quality_top: u8,
    pub jpeg_quality_bottom: u8,
    /// Peak amplitude of the fixed-pattern sensor noise, in 8-bit levels.
    pub sensor_noise: u8,
    /// Rope keyframe spacing during pushes, in mm of gripper travel.
    pub keyframe_mm: f64,
}

impl Default for ServerSection {
    fn default() -> Self {
        Self {
            time_scale: 1.0,
            stream_fps: 10.0,
            frame_cache_ms: 1000.0 / 30.0,
            jpeg_quality_top: 85,
            jpeg_quality_bottom: 90,
            sensor_noise: 10,
            keyframe_mm: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RackConfig {
    pub robot_count: usize,
    pub host: String,
    /// First robot port; 0 lets the OS pick every port.
    pub base_port: u16,
    /// Orchestrator port serving `/registry`; 0 picks one.
    pub registry_port: u16,
    pub seed_base: u64,
    /// Advisory, bytes per second.
    pub bandwidth_budget: f64,
    pub token: String,
    pub heartbeat_interval_ms: u64,
    pub deployment: Deployment,
    /// Runtime worker threads for in-process cells; 0 means automatic.
    pub runtime_workers: usize,
    pub kinematics: KinematicsSection,
    pub workcell: WorkcellConfig,
    pub server: ServerSection,
}

impl Default for RackConfig {
    fn default() -> Self {
        Self {
            robot_count: 32,
            host: "127.0.0.1".into(),
            base_port: 0,
            registry_port: 0,
            seed_base: 1000,
            bandwidth_budget: DEFAULT_BANDWIDTH_BUDGET,
            token: "rack-secret".into(),
            heartbeat_interval_ms: 1000,
            deployment: Deployment::Threads,
            runtime_workers: 0,
            kinematics: KinematicsSection::default(),
            workcell: WorkcellConfig::default(),
            server: ServerSection::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing rack config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid rack config: {0}")]
    Invalid(String),
}

/// Everything one cell needs to boot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub index: usize,
    pub robot_id: String,
    pub seed: u64,
    pub token: String,
    pub arm: ArmConfig,
    pub noise: NoiseModel,
    pub workcell: WorkcellConfig,
    pub server: ServerSection,
}

pub fn robot_id(index: usize) -> String {
    format!("robot-{index:02}")
}

impl RackConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RackConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("rack config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if self.robot_count == 0 {
            return bad("robot_count must be at least 1");
        }
        if self.base_port != 0 && self.base_port as usize + self.robot_count - 1 > u16::MAX as usize {
            return bad("port range exceeds 65535");
        }
        if self.heartbeat_interval_ms == 0 {
            return bad("heartbeat_interval_ms must be positive");
        }
        let k = &self.kinematics;
        if !(k.v_max > 0.0 && k.a_max > 0.0) {
            return bad("v_max and a_max must be positive");
        }
        if !(k.steps_per_mm > 0.0) || k.workspace_mm.iter().any(|w| !(*w > 0.0)) {
            return bad("steps_per_mm and workspace_mm must be positive");
        }
        if !(self.server.time_scale > 0.0 && self.server.stream_fps > 0.0) {
            return bad("time_scale and stream_fps must be positive");
        }
        let noise = self.noise(0);
        noise.validate().map_err(|m| ConfigError::Invalid(m.into()))?;
        Ok(())
    }

    pub fn port(&self, index: usize) -> u16 {
        if self.base_port == 0 {
            0
        } else {
            self.base_port + index as u16
        }
    }

    pub fn seed(&self, index: usize) -> u64 {
        self.seed_base.wrapping_add(index as u64)
    }

    pub fn arm(&self) -> ArmConfig {
        let k = &self.kinematics;
        ArmConfig {
            steps_per_mm: k.steps_per_mm,
            workspace_mm: k.workspace_mm,
            z_travel_mm: k.z_travel_mm,
            profile: MotionProfile {
                v_max: k.v_max,
                a_max: k.a_max,
            },
            servo: k.servo,
            current: CurrentModel {
                threshold: k.current_threshold,
                ..CurrentModel::default()
            },
            obstacles: k.obstacles.clone(),
        }
    }

    pub fn noise(&self, index: usize) -> NoiseModel {
        let k = &self.kinematics;
        NoiseModel {
            sigma_xy_mm: k.sigma_xy_mm,
            sigma_z_mm: k.sigma_z_mm,
            offset_sigma_xy_mm: k.offset_sigma_xy_mm,
            offset_sigma_z_mm: k.offset_sigma_z_mm,
            seed: self.seed(index),
        }
    }

    pub fn cell(&self, index: usize) -> CellConfig {
        let mut workcell = self.workcell.clone();
        workcell.workspace_mm = self.kinematics.workspace_mm;
        CellConfig {
            index,
            robot_id: robot_id(index),
            seed: self.seed(index),
            token: self.token.clone(),
            arm: self.arm(),
            noise: self.noise(index),
            workcell,
            server: self.server.clone(),
        }
    }
}
