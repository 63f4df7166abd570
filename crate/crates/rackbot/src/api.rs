//! JSON bodies exchanged between robot servers and clients.

use rackbot_core::geom::Vec2;
use rackbot_core::kinematics::{CollisionEvent, MoveTarget, RobotPose};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const TOKEN_HEADER: &str = "x-api-token";
pub const SEQ_HEADER: &str = "x-frame-seq";
pub const TS_HEADER: &str = "x-frame-ts";
pub const STREAM_SEQ_HEADER: &str = "x-stream-seq";
pub const STREAM_BOUNDARY: &str = "frame";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotStatus {
    pub robot_id: String,
    /// Actual pose; mid-motion this is the current sample of the motion.
    pub pose: RobotPose,
    /// Pose the last accepted command asked for.
    pub commanded: RobotPose,
    pub busy: bool,
    pub homed: bool,
    pub last_collision: Option<CollisionEvent>,
    pub command_counter: u64,
    pub uptime_s: f64,
    pub snapshot_ts_ms: u64,
    pub snapshot_seq: u64,
    /// Digest of `snapshot_seq` and every pose field, see [`snapshot_nonce`].
    pub nonce: String,
}

/// FNV-1a over the snapshot sequence number and the bit patterns of the
/// pose, so a reader can tell whether all fields came from one instant.
pub fn snapshot_nonce(seq: u64, pose: &RobotPose) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let words = [seq, pose.x.to_bits(), pose.y.to_bits(), pose.z.to_bits(), pose.r.to_bits(), pose.d.to_bits()];
    for w in words {
        for b in w.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    MoveXy,
    MoveZ,
    Rotate,
    Gripper,
    Calibrate,
}

impl CommandKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandKind::MoveXy => "move_xy",
            CommandKind::MoveZ => "move_z",
            CommandKind::Rotate => "rotate",
            CommandKind::Gripper => "gripper",
            CommandKind::Calibrate => "calibrate",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "move_xy" => CommandKind::MoveXy,
            "move_z" => CommandKind::MoveZ,
            "rotate" => CommandKind::Rotate,
            "gripper" => CommandKind::Gripper,
            "calibrate" => CommandKind::Calibrate,
            _ => return None,
        })
    }
}

/// A motion command. `move_xy` drives through `waypoints` (if any) and
/// ends at `(x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandRequest {
    pub kind: CommandKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub waypoints: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl ValidationError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl CommandRequest {
    fn bare(kind: CommandKind) -> Self {
        Self {
            kind,
            x: None,
            y: None,
            z: None,
            r: None,
            d: None,
            waypoints: Vec::new(),
        }
    }

    pub fn move_xy(x: f64, y: f64) -> Self {
        Self {
            x: Some(x),
            y: Some(y),
            ..Self::bare(CommandKind::MoveXy)
        }
    }

    pub fn move_path(waypoints: &[[f64; 2]], x: f64, y: f64) -> Self {
        Self {
            waypoints: waypoints.to_vec(),
            ..Self::move_xy(x, y)
        }
    }

    pub fn move_z(z: f64) -> Self {
        Self {
            z: Some(z),
            ..Self::bare(CommandKind::MoveZ)
        }
    }

    pub fn rotate(r: f64) -> Self {
        Self {
            r: Some(r),
            ..Self::bare(CommandKind::Rotate)
        }
    }

    pub fn gripper(d: f64) -> Self {
        Self {
            d: Some(d),
            ..Self::bare(CommandKind::Gripper)
        }
    }

    pub fn calibrate() -> Self {
        Self::bare(CommandKind::Calibrate)
    }

    /// Parses a request body, naming the first offending field on error.
    pub fn from_json(body: &[u8]) -> Result<Self, ValidationError> {
        let value: Value =
            serde_json::from_slice(body).map_err(|e| ValidationError::new("body", e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| ValidationError::new("body", "expected a JSON object"))?;
        let kind = obj
            .get("kind")
            .and_then(Value::as_str)
            .and_then(CommandKind::parse)
            .ok_or_else(|| {
                ValidationError::new("kind", "expected one of move_xy, move_z, rotate, gripper, calibrate")
            })?;
        let number = |name: &str| -> Result<Option<f64>, ValidationError> {
            match obj.get(name) {
                None | Some(Value::Null) => Ok(None),
                Some(v) => v
                    .as_f64()
                    .map(Some)
                    .ok_or_else(|| ValidationError::new(name, "expected a number")),
            }
        };
        let mut waypoints = Vec::new();
        match obj.get("waypoints") {
            None | Some(Value::Null) => {}
            Some(Value::Array(items)) => {
                for (i, item) in items.iter().enumerate() {
                    let pair = item.as_array().filter(|a| a.len() == 2);
                    let coords = pair.and_then(|a| Some([a[0].as_f64()?, a[1].as_f64()?]));
                    waypoints.push(coords.ok_or_else(|| {
                        ValidationError::new(format!("waypoints[{i}]"), "expected [x, y]")
                    })?);
                }
            }
            Some(_) => return Err(ValidationError::new("waypoints", "expected a list of [x, y]")),
        }
        let request = Self {
            kind,
            x: number("x")?,
            y: number("y")?,
            z: number("z")?,
            r: number("r")?,
            d: number("d")?,
            waypoints,
        };
        request.validate()?;
        Ok(request)
    }

    /// Checks presence and range of the parameters `kind` needs.
    pub fn validate(&self) -> Result<(), ValidationError> {
        fn check(name: &str, value: Option<f64>, lo: f64, hi: f64) -> Result<f64, ValidationError> {
            let v = value.ok_or_else(|| ValidationError::new(name, "missing"))?;
            if v.is_finite() && v >= lo && v <= hi {
                Ok(v)
            } else {
                Err(ValidationError::new(name, format!("{v} outside [{lo}, {hi}]")))
            }
        }
        match self.kind {
            CommandKind::MoveXy => {
                for (i, w) in self.waypoints.iter().enumerate() {
                    check(&format!("waypoints[{i}].x"), Some(w[0]), 0.0, 1.0)?;
                    check(&format!("waypoints[{i}].y"), Some(w[1]), 0.0, 1.0)?;
                }
                check("x", self.x, 0.0, 1.0)?;
                check("y", self.y, 0.0, 1.0)?;
            }
            CommandKind::MoveZ => {
                check("z", self.z, 0.0, 1.0)?;
            }
            CommandKind::Rotate => {
                check("r", self.r, -RobotPose::R_LIMIT_DEG, RobotPose::R_LIMIT_DEG)?;
            }
            CommandKind::Gripper => {
                check("d", self.d, 0.0, 1.0)?;
            }
            CommandKind::Calibrate => {}
        }
        Ok(())
    }

    /// The kinematic target of a validated request; `None` for calibration.
    pub fn target(&self) -> Option<MoveTarget> {
        let v = |o: Option<f64>| o.unwrap_or(f64::NAN);
        Some(match self.kind {
            CommandKind::MoveXy => {
                let mut points: Vec<Vec2> = self.waypoints.iter().map(|w| Vec2::new(w[0], w[1])).collect();
                points.push(Vec2::new(v(self.x), v(self.y)));
                MoveTarget::Xy(points)
            }
            CommandKind::MoveZ => MoveTarget::Z(v(self.z)),
            CommandKind::Rotate => MoveTarget::Rotate(v(self.r)),
            CommandKind::Gripper => MoveTarget::Gripper(v(self.d)),
            CommandKind::Calibrate => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Receipt {
    pub command_id: u64,
    pub kind: CommandKind,
    pub accepted_ts_ms: u64,
    /// Simulated duration of the motion.
    pub duration_s: f64,
    pub collision: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub robot_id: String,
}

/// Simulator introspection: the rope as it will be once the current
/// motion finishes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RopeSnapshot {
    pub robot_id: String,
    pub revision: u64,
    pub busy: bool,
    pub particles: Option<Vec<[f64; 2]>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_validate() {
        let ok = CommandRequest::from_json(br#"{"kind":"move_xy","x":0.5,"y":0.25}"#).unwrap();
        assert_eq!(ok, CommandRequest::move_xy(0.5, 0.25));
        let err = CommandRequest::from_json(br#"{"kind":"move_xy","x":1.5,"y":0.25}"#).unwrap_err();
        assert_eq!(err.field, "x");
        let err = CommandRequest::from_json(br#"{"kind":"jump"}"#).unwrap_err();
        assert_eq!(err.field, "kind");
        let err = CommandRequest::from_json(br#"{"kind":"move_z"}"#).unwrap_err();
        assert_eq!(err.field, "z");
        let err =
            CommandRequest::from_json(br#"{"kind":"move_xy","x":0.5,"y":0.5,"waypoints":[[0.1,2.0]]}"#)
                .unwrap_err();
        assert_eq!(err.field, "waypoints[0].y");
    }

    #[test]
    fn round_trip() {
        let req = CommandRequest::move_path(&[[0.1, 0.2]], 0.3, 0.4);
        let json = serde_json::to_vec(&req).unwrap();
        assert_eq!(CommandRequest::from_json(&json).unwrap(), req);
    }

    #[test]
    fn nonce_depends_on_every_field() {
        let p = RobotPose::HOME;
        let base = snapshot_nonce(1, &p);
        assert_ne!(base, snapshot_nonce(2, &p));
        assert_ne!(base, snapshot_nonce(1, &RobotPose { d: 0.5, ..p }));
    }
}
