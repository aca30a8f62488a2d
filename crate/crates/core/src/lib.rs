//! Comb-Bernoulli modelling of dependent sparse claim series.
//!
//! Each component of a claim vector is zero with probability `1 - p_i` and
//! lognormal otherwise; components are coupled by a Gaussian copula on the
//! mixed marginal cdfs.

// `!(x > 0.0)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod bootstrap;
pub mod copula;
pub mod data;
pub mod error;
pub mod estimation;
pub mod levy;
pub mod marginals;
pub mod model;
pub mod mvn;
pub mod rng;

pub use error::{Error, Result};

/// Version of this library.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
