//! Exact, finite-horizon machinery for martingales, staged tests, prefix-free
//! machines and the diagonal construction over Cantor space.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diagonal;
pub mod kraft_chaitin;
pub mod machines;
pub mod martingales;
pub mod ml_tests;
pub mod numeric;
pub mod orders;
pub mod sequences;

pub use numeric::{BitString, ClopenSet, Dyadic, Rational};
pub use orders::{OrderError, OrderFn};
