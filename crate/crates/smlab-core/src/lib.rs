//! Spectral multipliers, heat kernels and operator-norm estimates on finite
//! metric-measure spaces.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::excessive_precision)]

pub mod calculus;
pub mod error;
pub mod estimates;
pub mod fit;
pub mod metric_space;
pub mod norms;
pub mod operators;
pub mod quadrature;

pub use error::{Error, Result};
