// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod drude;
pub mod error;
pub mod geometry;
pub mod potentials;
pub mod quasi_green;
pub mod resonance;
pub mod special;
pub mod spectrum;

pub use error::{Error, Result};
