//! Exact rank-2 cluster scattering diagrams, broken lines, theta functions,
//! structure constants and broken-line convexity.
//!
//! All arithmetic is exact over arbitrary-precision rationals.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod brokenline;
pub mod constructions;
pub mod convexity;
mod error;
pub mod lattice;
pub mod scattering;
pub mod series;

pub use error::{Error, Result};
