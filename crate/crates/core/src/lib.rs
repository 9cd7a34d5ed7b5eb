//! Simulation and verification of perpetuities, branching random walks and
//! the size-biased spine that links them.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod brwsim;
pub mod error;
pub mod inequalities;
pub mod parallel;
pub mod perpsim;
pub mod rng;
pub mod rvkit;
pub mod spinesim;
pub mod law;
pub mod moments;
pub mod stats;

pub use error::{Error, Result};
pub use rng::Stream;
