//! Satellite slice orchestration core.
//!
//! The satellite HUB is modelled as a shared pool of compute hosts and beam
//! capacity. Each slice request is mapped to a satellite QoS class, gets a
//! gateway composed from a catalog of network functions, passes admission
//! control, and is stitched to its neighbouring subnets by classifier rules.
//! The [`emulator`] replays traffic over the resulting configuration to check
//! per-slice guarantees.

pub mod classifier;
pub mod composer;
pub mod config;
pub mod emulator;
pub mod pool;
pub mod qos;
pub mod slice;
pub mod units;

pub use units::Rate;
