//! Runtime reachability-based safety supervision for a ReLU-network
//! controlled unicycle robot.
//!
//! The crate bundles the pieces of the loop: sound interval and Taylor-model
//! arithmetic, Bernstein enclosures of ReLU, Taylor-model propagation through
//! a feed-forward network, flowpipe integration of the unicycle dynamics, a
//! simulated 2D world with ray-cast LiDAR, the learned and geometric
//! controllers, and the supervisor that switches between them.

pub mod bernstein;
pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod flowpipe;
pub mod interval;
pub mod network;
pub mod nn_reach;
pub mod supervisor;
pub mod taylor;
pub mod trainer;
pub mod world;

pub use error::{Error, Result};
pub use interval::Interval;
