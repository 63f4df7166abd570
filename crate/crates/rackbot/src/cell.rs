//! One simulated work cell: arm, rope and the playback of the motion in
//! progress against wall-clock time.

use std::sync::Arc;

use rackbot_core::geom::Vec2;
use rackbot_core::kinematics::{Arm, CollisionEvent, KinematicsError, Motion, RobotPose};
use rackbot_core::workcell::{simulate_path, RopeState};

use crate::api::{snapshot_nonce, CommandRequest, Receipt, RobotStatus, RopeSnapshot, ValidationError};
use crate::config::CellConfig;

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("robot is busy executing a motion")]
    Busy,
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Identifies what a camera would see, so unchanged scenes are not
/// rendered twice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SceneKey {
    pose_bits: [u64; 5],
    rope_revision: u64,
    keyframe: usize,
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub pose: RobotPose,
    pub rope: Option<Arc<RopeState>>,
    pub key: SceneKey,
}

struct Active {
    accepted_ms: f64,
    motion: Motion,
    rope_before: Option<Arc<RopeState>>,
    revision_before: u64,
    /// Rope shapes by gripper arc length, only for XY motions that push.
    keyframes: Vec<(f64, Arc<RopeState>)>,
}

pub struct CellSim {
    cfg: CellConfig,
    arm: Arm,
    /// Rope once the active motion (if any) has finished.
    rope: Option<Arc<RopeState>>,
    rope_revision: u64,
    active: Option<Active>,
    last_collision: Option<CollisionEvent>,
    command_counter: u64,
    snapshot_seq: u64,
    boot_ms: f64,
}

impl CellSim {
    /// Builds the cell and homes it. Boot homing is not a counted command.
    pub fn new(cfg: CellConfig, now_ms: f64) -> Result<Self, KinematicsError> {
        let mut arm = Arm::new(cfg.arm.clone(), cfg.noise)?;
        arm.home_calibrate();
        let rope = cfg.workcell.initial_rope().map(Arc::new);
        Ok(Self {
            cfg,
            arm,
            rope,
            rope_revision: 0,
            active: None,
            last_collision: None,
            command_counter: 0,
            snapshot_seq: 0,
            boot_ms: now_ms,
        })
    }

    pub fn config(&self) -> &CellConfig {
        &self.cfg
    }

    fn elapsed_s(&self, active: &Active, now_ms: f64) -> f64 {
        (now_ms - active.accepted_ms) / 1000.0 * self.cfg.server.time_scale
    }

    pub fn is_busy(&self, now_ms: f64) -> bool {
        self.active
            .as_ref()
            .is_some_and(|a| self.elapsed_s(a, now_ms) < a.motion.duration())
    }

    pub fn pose_at(&self, now_ms: f64) -> RobotPose {
        match &self.active {
            Some(a) => a.motion.sample(self.elapsed_s(a, now_ms).max(0.0)),
            None => self.arm.actual(),
        }
    }

    pub fn scene_at(&self, ts_ms: f64) -> Scene {
        let pose = self.pose_at(ts_ms);
        let (rope, rope_revision, keyframe) = match &self.active {
            None => (self.rope.clone(), self.rope_revision, 0),
            Some(a) => {
                let t = self.elapsed_s(a, ts_ms);
                if t >= a.motion.duration() {
                    (self.rope.clone(), self.rope_revision, 0)
                } else if t <= 0.0 || a.keyframes.is_empty() {
                    (a.rope_before.clone(), a.revision_before, 0)
                } else {
                    let trajectory = a.motion.trajectory().expect("keyframes only exist for XY paths");
                    let arc = trajectory.arc_length(t);
                    match a.keyframes.iter().rposition(|(k, _)| *k <= arc) {
                        Some(i) => (Some(a.keyframes[i].1.clone()), self.rope_revision, i + 1),
                        None => (a.rope_before.clone(), a.revision_before, 0),
                    }
                }
            }
        };
        let key = SceneKey {
            pose_bits: [pose.x, pose.y, pose.z, pose.r, pose.d].map(f64::to_bits),
            rope_revision,
            keyframe,
        };
        Scene { pose, rope, key }
    }

    pub fn status(&mut self, now_ms: f64) -> RobotStatus {
        self.snapshot_seq += 1;
        let pose = self.pose_at(now_ms);
        RobotStatus {
            robot_id: self.cfg.robot_id.clone(),
            pose,
            commanded: self.arm.commanded(),
            busy: self.is_busy(now_ms),
            homed: self.arm.is_homed(),
            last_collision: self.last_collision,
            command_counter: self.command_counter,
            uptime_s: ((now_ms - self.boot_ms) / 1000.0).max(0.0),
            snapshot_ts_ms: now_ms as u64,
            snapshot_seq: self.snapshot_seq,
            nonce: snapshot_nonce(self.snapshot_seq, &pose),
        }
    }

    pub fn rope_snapshot(&self, now_ms: f64) -> RopeSnapshot {
        RopeSnapshot {
            robot_id: self.cfg.robot_id.clone(),
            revision: self.rope_revision,
            busy: self.is_busy(now_ms),
            particles: self
                .rope
                .as_ref()
                .map(|r| r.particles.iter().map(|p| [p.x, p.y]).collect()),
        }
    }

    /// Settled rope after all accepted motions.
    pub fn rope(&self) -> Option<&RopeState> {
        self.rope.as_deref()
    }

    pub fn arm(&self) -> &Arm {
        &self.arm
    }

    /// Admits a command if the arm is idle. The whole outcome, including
    /// the rope response, is computed here; playback follows the clock.
    pub fn command(&mut self, req: &CommandRequest, now_ms: f64) -> Result<Receipt, CommandError> {
        req.validate()?;
        if self.is_busy(now_ms) {
            return Err(CommandError::Busy);
        }
        let before = self.arm.actual();
        let (motion, collision) = match req.target() {
            None => (self.arm.home_calibrate(), None),
            Some(target) => {
                let outcome = self.arm.execute_move(&target)?;
                (outcome.motion, outcome.collision)
            }
        };
        let rope_before = self.rope.clone();
        let revision_before = self.rope_revision;
        let keyframes = self.push_rope(&motion, before);

        self.command_counter += 1;
        if collision.is_some() {
            self.last_collision = collision;
        }
        let receipt = Receipt {
            command_id: self.command_counter,
            kind: req.kind,
            accepted_ts_ms: now_ms as u64,
            duration_s: motion.duration(),
            collision: collision.is_some(),
        };
        self.active = Some(Active {
            accepted_ms: now_ms,
            motion,
            rope_before,
            revision_before,
            keyframes,
        });
        Ok(receipt)
    }

    fn touches_floor(&self, z: f64) -> bool {
        z <= self.cfg.workcell.contact_height
    }

    /// Moves the rope for a motion of a lowered gripper. Returns keyframes
    /// for playback of XY pushes.
    fn push_rope(&mut self, motion: &Motion, before: RobotPose) -> Vec<(f64, Arc<RopeState>)> {
        let Some(rope) = self.rope.clone() else {
            return Vec::new();
        };
        let wc = &self.cfg.workcell;
        let (path, keyframe_mm): (Vec<Vec2>, Option<f64>) = match motion {
            Motion::Path { trajectory, from, .. } if self.touches_floor(from.z) => {
                (trajectory.waypoints().to_vec(), Some(self.cfg.server.keyframe_mm))
            }
            Motion::Servo { to, .. } if self.touches_floor(to.z) && !self.touches_floor(before.z) => {
                (vec![wc.pose_xy_mm(to)], None)
            }
            _ => return Vec::new(),
        };
        let trace = simulate_path(&rope, &path, wc.footprint_radius_mm, &wc.rope, keyframe_mm);
        if !trace.contact {
            return Vec::new();
        }
        let base = (*rope).clone();
        self.rope = Some(Arc::new(trace.state));
        self.rope_revision += 1;
        trace
            .keyframes
            .into_iter()
            .map(|k| {
                let mut shape = base.clone();
                shape.particles = k.particles;
                (k.arc_mm, Arc::new(shape))
            })
            .collect()
    }
}
