//! Simulated gripper rack: per-robot REST servers, the rack orchestrator,
//! a blocking client, benchmark harnesses and the rope-pushing dataset
//! pipeline. Simulation proper lives in `rackbot-core`.

pub mod api;
pub mod bench;
pub mod camera;
pub mod cell;
pub mod client;
pub mod clock;
pub mod config;
pub mod dataset;
pub mod rack;
pub mod server;
