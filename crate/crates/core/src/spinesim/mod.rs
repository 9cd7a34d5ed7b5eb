//! The size-biased tree seen from its spine.

mod checks;
mod path;

pub use checks::*;
pub use path::*;
