//! Similarity tests for two competing-risks models with constant
//! cause-specific intensities.
//!
//! The tests compare the groups' transition probabilities in sup-norm (or,
//! as a comparator, their intensities) and calibrate the decision with a
//! parametric bootstrap drawn from estimates constrained to the boundary of
//! the null hypothesis. Administrative and exponential random right
//! censoring are supported.
//!
//! The model layer is generic over the floating-point type; the rest of the
//! crate works in `f64` through the aliases below.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod inference;
pub mod io;
pub mod model;
pub mod rng;
pub mod scan;
pub mod simulate;
pub mod study;
pub mod testkit;

pub use error::{Error, Result};

pub type Params = model::ModelParams<f64>;
pub type Censoring = model::CensoringSpec<f64>;
pub type Witness = model::SupDistanceWitness<f64>;
