//! Wasserstein bounds between an Itô process with jumps and a jump-diffusion.
//!
//! The pieces, in the order a verification run uses them:
//! [`simulate`] draws coupled Euler paths, [`characteristics`] integrates the
//! coefficient gaps along them, [`flow`] estimates the moment constants of the
//! derivative flow, [`bounds`] assembles the right-hand sides and [`distance`]
//! measures the left-hand sides. [`pipeline`] runs all of it from a [`scenario`].

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod characteristics;
pub mod distance;
pub mod error;
pub mod flow;
pub mod measure;
pub mod pipeline;
pub mod process;
pub mod quadrature;
pub mod rng;
pub mod scenario;
pub mod simulate;
pub mod smoothing;
pub mod stats;
pub mod testfn;

pub use error::{Error, Result};
