//! Exact numbers, binary strings and clopen subsets of Cantor space.

mod bits;
mod clopen;
mod dyadic;
mod rational;

pub use bits::{llex_cmp, sqsubseteq_cmp, BitString, ParseBitsError};
pub use clopen::{minimal_prefix_free, ClopenSet};
pub use dyadic::Dyadic;
pub use rational::Rational;

use alloc::string::String;

/// A number literal that could not be read.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed number `{0}`")]
pub struct ParseNumberError(pub String);
