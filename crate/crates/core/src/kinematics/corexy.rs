//! CoreXY belt transform between Cartesian displacements and motor steps.
//!
//! Motor A turns with `x + y` and motor B with `x - y`; both motors are
//! stationary, so a pure X move spins them in the same direction and a pure
//! Y move spins them in opposite directions.

use serde::{Deserialize, Serialize};

use crate::geom::Vec2;

/// Signed step counters of the two belt motors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MotorSteps {
    pub a: i64,
    pub b: i64,
}

impl MotorSteps {
    pub const ZERO: MotorSteps = MotorSteps { a: 0, b: 0 };

    pub const fn new(a: i64, b: i64) -> Self {
        Self { a, b }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreXy {
    steps_per_mm: f64,
}

impl Default for CoreXy {
    fn default() -> Self {
        Self::new(80.0)
    }
}

impl CoreXy {
    pub const fn new(steps_per_mm: f64) -> Self {
        Self { steps_per_mm }
    }

    pub fn steps_per_mm(&self) -> f64 {
        self.steps_per_mm
    }

    /// Motor step delta for a Cartesian displacement in millimeters, rounded
    /// to the nearest whole step.
    pub fn forward(&self, displacement: Vec2) -> MotorSteps {
        let k = self.steps_per_mm;
        MotorSteps {
            a: libm::round((displacement.x + displacement.y) * k) as i64,
            b: libm::round((displacement.x - displacement.y) * k) as i64,
        }
    }

    /// Cartesian displacement in millimeters produced by a motor step delta.
    pub fn inverse(&self, steps: MotorSteps) -> Vec2 {
        let two_k = 2.0 * self.steps_per_mm;
        Vec2::new(
            (steps.a + steps.b) as f64 / two_k,
            (steps.a - steps.b) as f64 / two_k,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn forward_examples() {
        let k = CoreXy::new(80.0);
        assert_eq!(k.forward(Vec2::new(0.0, 0.0)), MotorSteps::new(0, 0));
        assert_eq!(k.forward(Vec2::new(1.0, 0.0)), MotorSteps::new(80, 80));
        assert_eq!(k.forward(Vec2::new(3.0, -2.0)), MotorSteps::new(80, 400));
    }

    #[test]
    fn inverse_examples() {
        let k = CoreXy::new(80.0);
        assert_eq!(k.inverse(MotorSteps::new(0, 0)), Vec2::new(0.0, 0.0));
        assert_eq!(k.inverse(MotorSteps::new(80, 80)), Vec2::new(1.0, 0.0));
        assert_eq!(k.inverse(MotorSteps::new(80, 400)), Vec2::new(3.0, -2.0));
    }

    proptest! {
        #[test]
        fn lattice_round_trip(a in -2_000_000i64..2_000_000, b in -2_000_000i64..2_000_000) {
            let k = CoreXy::default();
            let v = k.inverse(MotorSteps::new(a, b));
            prop_assert_eq!(k.forward(v), MotorSteps::new(a, b));
            prop_assert_eq!(k.inverse(k.forward(v)), v);
        }
    }
}
