// `!(x <= y)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constellation;
pub mod crlb;
pub mod detect;
pub mod error;
pub mod harness;
pub mod instance;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod scenario;
pub mod selftest;
pub mod special;

pub use error::{Error, Result};
