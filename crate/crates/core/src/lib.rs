//! Sparse polynomial chaos surrogates of frequency response functions.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaos;
pub mod dynsys;
pub mod error;
pub mod reduce;
pub mod sigproc;
pub mod study;
pub mod surrogate;

pub use error::{Error, ErrorKind, Result};
