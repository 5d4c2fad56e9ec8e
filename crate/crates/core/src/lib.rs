//! Stochastic six-vertex model on the strip `0 <= y <= x <= y + N` with two
//! open boundaries.

pub mod askey_wilson;
pub mod dynamics;
pub mod error;
pub mod exact;
pub mod lattice;
pub mod mpa;

pub use error::{Error, Result};
