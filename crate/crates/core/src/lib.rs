//! Singular MDL laboratory core.
//!
//! Everything in this crate is pure computation: dense linear algebra,
//! seeded random streams, loss landscapes with known learning coefficients,
//! a small tanh MLP, SGLD-based local learning coefficient estimation,
//! Monte-Carlo sublevel volumes, the compression schemes with their
//! critical-threshold searches, and two-part codes on finite outcome spaces.
//!
//! The crate builds without `std` (it needs `alloc`); file formats, configs
//! and the command line live in the `smdl-lab` companion crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

mod num;

pub mod analysis;
pub mod compress;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod llc;
pub mod mdl;
pub mod rng;
pub mod volume;
pub mod zoo;

pub use error::{Error, Result};
