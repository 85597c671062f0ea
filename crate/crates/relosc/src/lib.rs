//! Numerical laboratory for periodic orbits of relativistic-type
//! oscillators: a slope-constrained variational principle, a perturbed
//! saddle functional, hypothesis checkers, and a two-minima search.

// `!(x > 0.0)` is the NaN-rejecting form of the domain guards here;
// `x <= 0.0` would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod config;
pub mod error;
pub mod expr;
pub mod hypotheses;
pub mod minimize;
pub mod potentials;
pub mod report;
pub mod saddle;
pub mod trajectory;
pub mod verify;

pub use error::{Error, Result};
