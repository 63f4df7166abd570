//! Arm kinematics: the CoreXY belt stage, servo axes, trapezoidal path
//! planning, actuation noise and current-based stall detection.

mod arm;
mod collision;
mod corexy;
mod noise;
mod trajectory;

pub use arm::{Arm, ArmConfig, Axis, Motion, MoveOutcome, MoveTarget, RobotPose, ServoRates};
pub use collision::{detect_collision, CollisionEvent, CurrentModel};
pub use corexy::{CoreXy, MotorSteps};
pub use noise::NoiseModel;
pub use trajectory::{plan_trajectory, MotionProfile, Trajectory, TrajectoryError};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum KinematicsError {
    #[error("{field} = {value} is outside its range")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("robot is not homed")]
    NotHomed,
    #[error("an XY move needs at least one waypoint")]
    EmptyPath,
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("invalid noise model: {0}")]
    InvalidNoise(&'static str),
}
