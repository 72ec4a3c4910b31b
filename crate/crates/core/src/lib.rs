//! Cartesian path-following trajectory generation for redundant serial
//! manipulators.
//!
//! The crate covers the full pipeline: SE(3) utilities and kinematics, an
//! occupancy/SDF world model, target-path synthesis, the trajectory
//! optimization objective and a first-order optimizer, three trajectory
//! initializers (linear, greedy, learned policy), the path-conditioned MDP
//! used to train policies, and a benchmark harness.

pub mod bench;
pub mod error;
pub mod initializers;
pub mod kinematics;
pub mod mdp;
pub mod objective;
pub mod paths;
pub mod policy;
pub mod se3;
pub mod trajopt;
pub mod world;

pub use error::{Error, Result};
