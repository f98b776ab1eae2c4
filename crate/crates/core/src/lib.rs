//! Coordinated multi-robot trajectories at road intersections.
//!
//! Each robot gets a triangular lattice roadmap around its reference path,
//! parameterized by a base `b` and height `h`. A discrete RRT* search over
//! the product of the roadmaps yields a synchronized collision-free joint
//! plan whose total length is the cost minimized by RADES, a rank-biased
//! differential evolution with a success archive.

pub mod bench;
pub mod error;
pub mod geometry;
pub mod objective;
pub mod optimizer;
pub mod rng;
pub mod roadmap;
pub mod planner;
pub mod scenario;

pub use error::{Error, Result};
