//! Regularly varying `b`, its concave surrogates and the subadditive `phi`.

pub mod bfun;
pub mod phi;
pub mod surrogate;

pub use bfun::{BFunctionSpec, Family};
pub use phi::{check_regular_variation, submultiplicative_constant, PhiFunction, RvHandle, RvReport};
pub use surrogate::{default_grid, make_surrogate, select_c, ConcaveSurrogate, SurrogateKind};
