//! Branching random walks and their intrinsic martingale.

mod generation;
mod martingale;

pub use generation::*;
pub use martingale::*;
