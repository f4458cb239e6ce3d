//! Imagination-inspired motion planning on a cluttered table: geometry,
//! world model, contact simulation, operability estimation, the local energy
//! field, the planner with its baselines, and the benchmark harness.

pub mod bench;
pub mod energy;
pub mod estimator;
pub mod geometry;
pub mod numfmt;
pub mod planner;
pub mod sim;
pub mod world;
