//! Rope-pushing dataset: collection over the fleet, on-disk layout,
//! validation and replay.

pub mod collect;
pub mod layout;
pub mod mask;
pub mod replay;
pub mod validate;
