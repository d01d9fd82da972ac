//! Optimal control in linearly solvable MDPs and online learning against
//! adversarial state costs.
//!
//! - [`lmdp`]: eigenvector solver for the optimal average cost, value and policy.
//! - [`chain`]: stationary distributions, ergodicity coefficients, mixing and hitting times.
//! - [`convex`]: the stationary-transition-measure formulation with a Frank–Wolfe minimizer.
//! - [`online`]: follow-the-leader against oblivious cost sequences, regret and bound ledgers.
//! - [`experiment`]: configs, instance generators, trace files and verification reports.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod chain;
pub mod convex;
pub mod cycle;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod lmdp;
pub mod online;

pub use dynamics::{kl_divergence, PassiveDynamics, Policy, StateCost};
pub use error::{LmdpError, Result};
pub use lmdp::{solve, LmdpSolution};
