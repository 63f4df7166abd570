//! Simulation core for a rack of tabletop 5-DOF Cartesian gripper cells:
//! arm kinematics, the rope work cell and its cameras, and the statistics
//! used by the benchmarks. Allocation is required; `std` is not.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod geom;
pub mod kinematics;
pub mod sampling;
pub mod stats;
pub mod workcell;

pub use geom::{Rect, Vec2};
