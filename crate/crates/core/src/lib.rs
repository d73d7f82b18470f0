//! Online revenue maximization under a hard inventory constraint.
//!
//! [`offline`] computes the hindsight optimum, [`online`] implements the
//! CR-Pursuit(π) algorithm and its ratio parameters, [`adversary`] builds
//! worst-case inputs and the stopping adversary, and [`harness`] drives
//! experiments from JSON configs.

pub mod adversary;
pub mod harness;
pub mod offline;
pub mod online;
pub mod revenue;
