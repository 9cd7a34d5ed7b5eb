//! Perpetuity paths, truncated limits, ladder structure and stopping times.

mod ladder;
mod path;
mod symm;
mod wald;
mod zinf;

pub use ladder::*;
pub use path::*;
pub use symm::*;
pub use wald::*;
pub use zinf::*;
