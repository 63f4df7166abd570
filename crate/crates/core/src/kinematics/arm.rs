//! The 5-DOF arm as a single-owner state machine.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::collision::{detect_collision, CollisionEvent, CurrentModel};
use super::corexy::{CoreXy, MotorSteps};
use super::noise::NoiseModel;
use super::trajectory::{plan_trajectory, MotionProfile, Trajectory};
use super::KinematicsError;
use crate::geom::{Rect, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
    R,
    D,
}

/// Normalized arm configuration.
///
/// `x`, `y` and `z` map linearly onto the travel of each axis (`z = 0`
/// touches the floor plate), `r` is the gripper rotation in degrees and `d`
/// the jaw opening (`0` closed).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub r: f64,
    pub d: f64,
}

impl RobotPose {
    /// Pose right after homing: at the XY origin, raised, open.
    pub const HOME: RobotPose = RobotPose {
        x: 0.0,
        y: 0.0,
        z: 1.0,
        r: 0.0,
        d: 1.0,
    };

    pub const R_LIMIT_DEG: f64 = 90.0;

    pub fn range(axis: Axis) -> (f64, f64) {
        match axis {
            Axis::R => (-Self::R_LIMIT_DEG, Self::R_LIMIT_DEG),
            _ => (0.0, 1.0),
        }
    }

    pub fn get(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
            Axis::R => self.r,
            Axis::D => self.d,
        }
    }

    fn set(&mut self, axis: Axis, value: f64) {
        match axis {
            Axis::X => self.x = value,
            Axis::Y => self.y = value,
            Axis::Z => self.z = value,
            Axis::R => self.r = value,
            Axis::D => self.d = value,
        }
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        for axis in [Axis::X, Axis::Y, Axis::Z, Axis::R, Axis::D] {
            check_range(axis, self.get(axis))?;
        }
        Ok(())
    }

    pub fn clamped(&self) -> RobotPose {
        let mut out = *self;
        for axis in [Axis::X, Axis::Y, Axis::Z, Axis::R, Axis::D] {
            let (lo, hi) = Self::range(axis);
            out.set(axis, self.get(axis).clamp(lo, hi));
        }
        out
    }
}

fn axis_name(axis: Axis) -> &'static str {
    match axis {
        Axis::X => "x",
        Axis::Y => "y",
        Axis::Z => "z",
        Axis::R => "r",
        Axis::D => "d",
    }
}

fn check_range(axis: Axis, value: f64) -> Result<(), KinematicsError> {
    let (lo, hi) = RobotPose::range(axis);
    if value.is_finite() && value >= lo && value <= hi {
        Ok(())
    } else {
        Err(KinematicsError::OutOfRange {
            field: axis_name(axis),
            value,
        })
    }
}

/// Slew rates of the three servo axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServoRates {
    pub z_full_travel_s: f64,
    pub r_deg_per_s: f64,
    pub d_full_travel_s: f64,
}

impl Default for ServoRates {
    fn default() -> Self {
        Self {
            z_full_travel_s: 0.5,
            r_deg_per_s: 180.0,
            d_full_travel_s: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArmConfig {
    pub steps_per_mm: f64,
    /// XY travel of the gripper center, `[x, y]` in mm.
    pub workspace_mm: [f64; 2],
    pub z_travel_mm: f64,
    pub profile: MotionProfile,
    pub servo: ServoRates,
    pub current: CurrentModel,
    /// Keep-out rectangles for the gripper center, in workspace mm.
    pub obstacles: Vec<Rect>,
}

impl Default for ArmConfig {
    fn default() -> Self {
        Self {
            steps_per_mm: 80.0,
            workspace_mm: [190.0, 250.0],
            z_travel_mm: 40.0,
            profile: MotionProfile::default(),
            servo: ServoRates::default(),
            current: CurrentModel::default(),
            obstacles: Vec::new(),
        }
    }
}

impl ArmConfig {
    pub fn travel(&self) -> Rect {
        Rect::from_size(self.workspace_mm[0], self.workspace_mm[1])
    }

    pub fn xy_to_mm(&self, x: f64, y: f64) -> Vec2 {
        Vec2::new(x * self.workspace_mm[0], y * self.workspace_mm[1])
    }

    pub fn mm_to_xy(&self, p: Vec2) -> (f64, f64) {
        (p.x / self.workspace_mm[0], p.y / self.workspace_mm[1])
    }
}

/// A partial pose command. XY moves carry the full waypoint list in
/// normalized coordinates; the last waypoint is the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveTarget {
    Xy(Vec<Vec2>),
    Z(f64),
    Rotate(f64),
    Gripper(f64),
}

/// What the arm does in simulated time while executing one command.
#[derive(Clone, Debug, PartialEq)]
pub enum Motion {
    Idle(RobotPose),
    Path {
        trajectory: Trajectory,
        from: RobotPose,
        to: RobotPose,
        /// Time spent pushing against a stall before the current detector trips.
        stall_s: f64,
        workspace_mm: [f64; 2],
    },
    Servo {
        axis: Axis,
        from: RobotPose,
        target: f64,
        to: RobotPose,
        duration: f64,
    },
}

impl Motion {
    pub fn duration(&self) -> f64 {
        match self {
            Motion::Idle(_) => 0.0,
            Motion::Path {
                trajectory,
                stall_s,
                ..
            } => trajectory.duration() + stall_s,
            Motion::Servo { duration, .. } => *duration,
        }
    }

    pub fn trajectory(&self) -> Option<&Trajectory> {
        match self {
            Motion::Path { trajectory, .. } => Some(trajectory),
            _ => None,
        }
    }

    pub fn final_pose(&self) -> RobotPose {
        match self {
            Motion::Idle(p) => *p,
            Motion::Path { to, .. } | Motion::Servo { to, .. } => *to,
        }
    }

    /// Pose at `t` seconds into the motion. Intermediate samples follow the
    /// commanded path; the noisy actual pose is reached at the end.
    pub fn sample(&self, t: f64) -> RobotPose {
        if t >= self.duration() {
            return self.final_pose();
        }
        match self {
            Motion::Idle(p) => *p,
            Motion::Path {
                trajectory,
                from,
                to,
                workspace_mm,
                ..
            } => {
                if t >= trajectory.duration() {
                    return *to;
                }
                let p = trajectory.sample(t);
                RobotPose {
                    x: (p.x / workspace_mm[0]).clamp(0.0, 1.0),
                    y: (p.y / workspace_mm[1]).clamp(0.0, 1.0),
                    ..*from
                }
            }
            Motion::Servo {
                axis,
                from,
                target,
                duration,
                ..
            } => {
                let start = from.get(*axis);
                let mut pose = *from;
                pose.set(*axis, start + (target - start) * (t.max(0.0) / duration));
                pose
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MoveOutcome {
    pub motion: Motion,
    pub collision: Option<CollisionEvent>,
}

impl MoveOutcome {
    pub fn actual(&self) -> RobotPose {
        self.motion.final_pose()
    }
}

/// Kinematic state of one robot.
#[derive(Clone, Debug)]
pub struct Arm {
    config: ArmConfig,
    noise: NoiseModel,
    corexy: CoreXy,
    rng: ChaCha8Rng,
    xy_noise: Normal<f64>,
    z_noise: Normal<f64>,
    /// Systematic per-robot error `[x, y, z]` in mm.
    offset_mm: [f64; 3],
    commanded: RobotPose,
    actual: RobotPose,
    steps: MotorSteps,
    homed: bool,
    clock_s: f64,
}

impl Arm {
    /// Builds an un-homed arm resting at [`RobotPose::HOME`].
    pub fn new(config: ArmConfig, noise: NoiseModel) -> Result<Self, KinematicsError> {
        noise.validate().map_err(KinematicsError::InvalidNoise)?;
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let normal = |sigma: f64| Normal::new(0.0, sigma).expect("validated sigma");
        let offset_xy = normal(noise.offset_sigma_xy_mm);
        let offset_z = normal(noise.offset_sigma_z_mm);
        let offset_mm = [
            offset_xy.sample(&mut rng),
            offset_xy.sample(&mut rng),
            offset_z.sample(&mut rng),
        ];
        Ok(Self {
            corexy: CoreXy::new(config.steps_per_mm),
            xy_noise: normal(noise.sigma_xy_mm),
            z_noise: normal(noise.sigma_z_mm),
            config,
            noise,
            rng,
            offset_mm,
            commanded: RobotPose::HOME,
            actual: RobotPose::HOME,
            steps: MotorSteps::ZERO,
            homed: false,
            clock_s: 0.0,
        })
    }

    pub fn config(&self) -> &ArmConfig {
        &self.config
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn commanded(&self) -> RobotPose {
        self.commanded
    }

    pub fn actual(&self) -> RobotPose {
        self.actual
    }

    pub fn steps(&self) -> MotorSteps {
        self.steps
    }

    pub fn is_homed(&self) -> bool {
        self.homed
    }

    /// Simulated seconds consumed by all motions so far.
    pub fn clock_s(&self) -> f64 {
        self.clock_s
    }

    pub fn offset_mm(&self) -> [f64; 3] {
        self.offset_mm
    }

    pub fn actual_xy_mm(&self) -> Vec2 {
        self.config.xy_to_mm(self.actual.x, self.actual.y)
    }

    /// The XY calibration switch closes only at the exact origin.
    pub fn home_switch_triggered(&self) -> bool {
        self.actual.x == 0.0 && self.actual.y == 0.0
    }

    /// Drives to the XY origin and re-zeroes the step counters, clearing any
    /// accumulated positioning error. Z, rotation and gripper are untouched.
    pub fn home_calibrate(&mut self) -> Motion {
        let travel = self.config.travel();
        let start = travel.clamp(self.actual_xy_mm());
        let trajectory = plan_trajectory(&[start, Vec2::ZERO], self.config.profile, &travel)
            .expect("origin and clamped start lie inside the travel");
        let from = self.actual;
        self.commanded.x = 0.0;
        self.commanded.y = 0.0;
        self.actual.x = 0.0;
        self.actual.y = 0.0;
        self.steps = MotorSteps::ZERO;
        self.homed = true;
        let motion = Motion::Path {
            trajectory,
            from,
            to: self.actual,
            stall_s: 0.0,
            workspace_mm: self.config.workspace_mm,
        };
        self.clock_s += motion.duration();
        motion
    }

    pub fn execute_move(&mut self, target: &MoveTarget) -> Result<MoveOutcome, KinematicsError> {
        if !self.homed {
            return Err(KinematicsError::NotHomed);
        }
        let outcome = match target {
            MoveTarget::Xy(waypoints) => self.move_xy(waypoints)?,
            MoveTarget::Z(z) => self.move_servo(Axis::Z, *z)?,
            MoveTarget::Rotate(r) => self.move_servo(Axis::R, *r)?,
            MoveTarget::Gripper(d) => self.move_servo(Axis::D, *d)?,
        };
        self.clock_s += outcome.motion.duration();
        Ok(outcome)
    }

    fn move_xy(&mut self, waypoints: &[Vec2]) -> Result<MoveOutcome, KinematicsError> {
        let last = *waypoints.last().ok_or(KinematicsError::EmptyPath)?;
        for w in waypoints {
            if !w.x.is_finite() {
                return Err(KinematicsError::OutOfRange { field: "x", value: w.x });
            }
            if !w.y.is_finite() {
                return Err(KinematicsError::OutOfRange { field: "y", value: w.y });
            }
        }
        if waypoints
            .iter()
            .all(|w| w.x == self.commanded.x && w.y == self.commanded.y)
        {
            return Ok(MoveOutcome {
                motion: Motion::Idle(self.actual),
                collision: None,
            });
        }

        let travel = self.config.travel();
        let start = self.actual_xy_mm();
        let mut path = vec![start];
        let mut contact = None;
        let mut previous = start;
        for w in waypoints {
            let next = self.config.xy_to_mm(w.x, w.y);
            if let Some((point, axis)) = self.first_contact(&travel, previous, next) {
                path.push(point);
                contact = Some((point, axis));
                break;
            }
            path.push(next);
            previous = next;
        }

        let trajectory = plan_trajectory(&path, self.config.profile, &travel)?;
        let from = self.actual;
        let workspace_mm = self.config.workspace_mm;
        let outcome = match contact {
            Some((point, axis)) => {
                let (x, y) = self.config.mm_to_xy(point);
                self.commanded.x = x;
                self.commanded.y = y;
                self.actual.x = x;
                self.actual.y = y;
                let current = self.config.current;
                let free_samples =
                    libm::ceil(trajectory.duration() * current.sample_rate_hz) as usize;
                let trace = current.stall_trace(free_samples);
                let tripped = detect_collision(&trace, current.threshold, current.debounce)
                    .expect("a stall trace always trips the detector");
                let stop_time = (tripped + 1) as f64 / current.sample_rate_hz;
                let event = CollisionEvent {
                    axis,
                    current_peak: trace.iter().copied().fold(0.0, f64::max),
                    pose_at_stop: self.actual,
                    timestamp: self.clock_s + stop_time,
                };
                MoveOutcome {
                    motion: Motion::Path {
                        stall_s: (stop_time - trajectory.duration()).max(0.0),
                        trajectory,
                        from,
                        to: self.actual,
                        workspace_mm,
                    },
                    collision: Some(event),
                }
            }
            None => {
                self.commanded.x = last.x;
                self.commanded.y = last.y;
                let nx = self.xy_noise.sample(&mut self.rng);
                let ny = self.xy_noise.sample(&mut self.rng);
                let [w, h] = self.config.workspace_mm;
                self.actual.x = (last.x + (self.offset_mm[0] + nx) / w).clamp(0.0, 1.0);
                self.actual.y = (last.y + (self.offset_mm[1] + ny) / h).clamp(0.0, 1.0);
                MoveOutcome {
                    motion: Motion::Path {
                        trajectory,
                        from,
                        to: self.actual,
                        stall_s: 0.0,
                        workspace_mm,
                    },
                    collision: None,
                }
            }
        };
        let commanded_mm = self.config.xy_to_mm(self.commanded.x, self.commanded.y);
        self.steps = self.corexy.forward(commanded_mm);
        Ok(outcome)
    }

    /// Earliest point along `a -> b` where the gripper center would leave
    /// the travel or enter a keep-out zone, snapped exactly onto the wall
    /// or face that stops it.
    fn first_contact(&self, travel: &Rect, a: Vec2, b: Vec2) -> Option<(Vec2, Axis)> {
        let mut best: Option<(f64, Axis, f64)> = None;
        let mut consider = |t: f64, axis: Axis, wall: f64| {
            if best.is_none_or(|(bt, _, _)| t < bt) {
                best = Some((t, axis, wall));
            }
        };
        let d = b - a;
        if d.x > 0.0 && b.x > travel.max.x {
            consider((travel.max.x - a.x) / d.x, Axis::X, travel.max.x);
        } else if d.x < 0.0 && b.x < travel.min.x {
            consider((travel.min.x - a.x) / d.x, Axis::X, travel.min.x);
        }
        if d.y > 0.0 && b.y > travel.max.y {
            consider((travel.max.y - a.y) / d.y, Axis::Y, travel.max.y);
        } else if d.y < 0.0 && b.y < travel.min.y {
            consider((travel.min.y - a.y) / d.y, Axis::Y, travel.min.y);
        }
        for obstacle in &self.config.obstacles {
            if let Some(t) = obstacle.entry_parameter(a, b) {
                let p = a.lerp(b, t);
                let nearest = |v: f64, lo: f64, hi: f64| if (v - lo).abs() <= (v - hi).abs() { lo } else { hi };
                let fx = nearest(p.x, obstacle.min.x, obstacle.max.x);
                let fy = nearest(p.y, obstacle.min.y, obstacle.max.y);
                if (p.x - fx).abs() <= (p.y - fy).abs() {
                    consider(t, Axis::X, fx);
                } else {
                    consider(t, Axis::Y, fy);
                }
            }
        }
        best.map(|(t, axis, wall)| {
            let mut p = a.lerp(b, t.clamp(0.0, 1.0));
            match axis {
                Axis::X => p.x = wall,
                _ => p.y = wall,
            }
            (travel.clamp(p), axis)
        })
    }

    fn move_servo(&mut self, axis: Axis, target: f64) -> Result<MoveOutcome, KinematicsError> {
        check_range(axis, target)?;
        let from = self.actual;
        if target == self.commanded.get(axis) {
            return Ok(MoveOutcome {
                motion: Motion::Idle(from),
                collision: None,
            });
        }
        let servo = self.config.servo;
        let travel_time = match axis {
            Axis::Z => (target - from.z).abs() * servo.z_full_travel_s,
            Axis::R => (target - from.r).abs() / servo.r_deg_per_s,
            Axis::D => (target - from.d).abs() * servo.d_full_travel_s,
            Axis::X | Axis::Y => unreachable!("XY moves use the belt drive"),
        };
        self.commanded.set(axis, target);
        let actual = if axis == Axis::Z {
            let err = self.offset_mm[2] + self.z_noise.sample(&mut self.rng);
            (target + err / self.config.z_travel_mm).clamp(0.0, 1.0)
        } else {
            target
        };
        self.actual.set(axis, actual);
        Ok(MoveOutcome {
            motion: Motion::Servo {
                axis,
                from,
                target,
                to: self.actual,
                duration: travel_time,
            },
            collision: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn xy(x: f64, y: f64) -> MoveTarget {
        MoveTarget::Xy(vec![Vec2::new(x, y)])
    }

    fn homed(noise: NoiseModel) -> Arm {
        let mut arm = Arm::new(ArmConfig::default(), noise).unwrap();
        arm.home_calibrate();
        arm
    }

    #[test]
    fn zero_noise_move_is_exact() {
        let mut arm = homed(NoiseModel::none());
        let out = arm.execute_move(&xy(0.5, 0.5)).unwrap();
        assert!(out.collision.is_none());
        assert_eq!((arm.actual().x, arm.actual().y), (0.5, 0.5));
        assert_eq!(arm.steps(), CoreXy::new(80.0).forward(Vec2::new(95.0, 125.0)));
    }

    #[test]
    fn requires_homing() {
        let mut arm = Arm::new(ArmConfig::default(), NoiseModel::none()).unwrap();
        assert_eq!(arm.execute_move(&xy(0.5, 0.5)), Err(KinematicsError::NotHomed));
        arm.home_calibrate();
        assert!(arm.is_homed());
        assert_eq!(arm.actual(), RobotPose::HOME);
    }

    #[test]
    fn servo_ranges_are_enforced() {
        let mut arm = homed(NoiseModel::none());
        assert!(matches!(
            arm.execute_move(&MoveTarget::Z(1.2)),
            Err(KinematicsError::OutOfRange { field: "z", .. })
        ));
        assert!(matches!(
            arm.execute_move(&MoveTarget::Rotate(-91.0)),
            Err(KinematicsError::OutOfRange { field: "r", .. })
        ));
        assert!(matches!(
            arm.execute_move(&MoveTarget::Gripper(f64::NAN)),
            Err(KinematicsError::OutOfRange { field: "d", .. })
        ));
        assert!(matches!(
            arm.execute_move(&MoveTarget::Xy(vec![Vec2::new(f64::INFINITY, 0.0)])),
            Err(KinematicsError::OutOfRange { field: "x", .. })
        ));
    }

    #[test]
    fn servo_durations() {
        let mut arm = homed(NoiseModel::none());
        let out = arm.execute_move(&MoveTarget::Z(0.0)).unwrap();
        assert!((out.motion.duration() - 0.5).abs() < 1e-12);
        let out = arm.execute_move(&MoveTarget::Rotate(90.0)).unwrap();
        assert!((out.motion.duration() - 0.5).abs() < 1e-12);
        let out = arm.execute_move(&MoveTarget::Gripper(0.0)).unwrap();
        assert!((out.motion.duration() - 0.3).abs() < 1e-12);
        assert_eq!(arm.actual().z, 0.0);
        assert_eq!(arm.actual().r, 90.0);
        assert_eq!(arm.actual().d, 0.0);
    }

    #[test]
    fn same_pose_completes_immediately() {
        let mut arm = homed(NoiseModel::default().with_seed(3));
        arm.execute_move(&xy(0.25, 0.75)).unwrap();
        let before = arm.actual();
        let out = arm.execute_move(&xy(0.25, 0.75)).unwrap();
        assert_eq!(out.motion.duration(), 0.0);
        assert_eq!(arm.actual(), before);
        let out = arm.execute_move(&MoveTarget::Z(1.0)).unwrap();
        assert_eq!(out.motion.duration(), 0.0);
    }

    #[test]
    fn wall_collision_stops_at_wall() {
        let mut arm = homed(NoiseModel::default().with_seed(9));
        arm.execute_move(&xy(0.5, 0.5)).unwrap();
        let out = arm.execute_move(&xy(1.3, 0.5)).unwrap();
        let event = out.collision.expect("blocked by the wall");
        assert_eq!(event.axis, Axis::X);
        assert_eq!(event.pose_at_stop.x, 1.0);
        assert_eq!(arm.actual().x, 1.0);
        assert_eq!(arm.commanded().x, 1.0);
        assert!(event.current_peak > arm.config().current.threshold);
        assert!(out.motion.duration() > out.motion.trajectory().unwrap().duration());
    }

    #[test]
    fn obstacle_collision() {
        let config = ArmConfig {
            obstacles: vec![Rect::new(Vec2::new(90.0, 100.0), Vec2::new(110.0, 150.0))],
            ..ArmConfig::default()
        };
        let mut arm = Arm::new(config, NoiseModel::none()).unwrap();
        arm.home_calibrate();
        arm.execute_move(&MoveTarget::Xy(vec![Vec2::new(0.1, 0.5)])).unwrap();
        let out = arm.execute_move(&xy(0.9, 0.5)).unwrap();
        let event = out.collision.unwrap();
        assert_eq!(event.axis, Axis::X);
        assert!((arm.actual_xy_mm().x - 90.0).abs() < 1e-9);
        // an unobstructed move afterwards works
        assert!(arm.execute_move(&xy(0.1, 0.1)).unwrap().collision.is_none());
    }

    #[test]
    fn multi_waypoint_collision_truncates_path() {
        let mut arm = homed(NoiseModel::none());
        let out = arm
            .execute_move(&MoveTarget::Xy(vec![
                Vec2::new(0.5, 0.5),
                Vec2::new(0.5, -0.2),
                Vec2::new(0.9, 0.9),
            ]))
            .unwrap();
        let event = out.collision.unwrap();
        assert_eq!(event.axis, Axis::Y);
        assert_eq!(arm.actual().y, 0.0);
        assert_eq!(arm.actual().x, 0.5);
    }

    #[test]
    fn repeated_returns_match_sigma() {
        // 10 returns to one point with sigma 0.027 mm; the chi-squared 99%
        // band for a 10-sample std is roughly [0.012, 0.044] mm.
        let mut arm = homed(NoiseModel::default().with_seed(2024));
        let mut deviations = Vec::new();
        for _ in 0..10 {
            arm.execute_move(&xy(0.8, 0.2)).unwrap();
            arm.execute_move(&xy(0.3, 0.6)).unwrap();
            let err = (arm.actual().x - arm.commanded().x) * 190.0;
            deviations.push(err);
        }
        let std = crate::stats::sample_std(&deviations).unwrap();
        assert!((0.013..=0.041).contains(&std), "std {std}");
    }

    #[test]
    fn homing_clears_drift() {
        let mut arm = homed(NoiseModel::default().with_seed(77));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            arm.execute_move(&xy(rng.random(), rng.random())).unwrap();
        }
        assert_ne!(arm.actual().x, arm.commanded().x);
        arm.home_calibrate();
        assert_eq!((arm.actual().x, arm.actual().y), (0.0, 0.0));
        assert_eq!((arm.commanded().x, arm.commanded().y), (0.0, 0.0));
        assert_eq!(arm.steps(), MotorSteps::ZERO);
        assert!(arm.home_switch_triggered());
    }

    #[test]
    fn zero_noise_round_trip_hits_home_switch() {
        let mut arm = homed(NoiseModel::none());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            arm.execute_move(&xy(rng.random(), rng.random())).unwrap();
            assert!(!arm.home_switch_triggered() || arm.actual().x == 0.0);
        }
        arm.execute_move(&xy(0.0, 0.0)).unwrap();
        assert!(arm.home_switch_triggered());
        assert_eq!(arm.steps(), MotorSteps::ZERO);
    }

    #[test]
    fn motion_samples_stay_between_endpoints() {
        let mut arm = homed(NoiseModel::none());
        let out = arm.execute_move(&xy(0.8, 0.0)).unwrap();
        let motion = out.motion;
        let mid = motion.sample(motion.duration() / 2.0);
        assert!(mid.x > 0.0 && mid.x < 0.8);
        assert_eq!(motion.sample(motion.duration()), arm.actual());
        assert_eq!(motion.sample(0.0).x, 0.0);
    }
}
