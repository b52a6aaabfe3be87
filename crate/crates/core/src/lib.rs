//! Security resource allocation over bipartite source/target networks when
//! the planner misperceives attack probabilities through a Prelec weighting.
//!
//! The crate provides a centralized projected-gradient solver, the analytical
//! water-filling construction for complete networks, a distributed ADMM
//! solver run over an in-process message bus, and scenario/CSV tooling.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod centralized;
pub mod cli;
pub mod error;
pub mod model;
pub mod projection;
mod roots;
pub mod scenario;
pub mod sweep;
pub mod waterfill;

pub use error::{Error, Result};
