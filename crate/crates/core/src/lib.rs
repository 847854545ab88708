// `!(x > 0.0)` is used on purpose so NaN is rejected; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod certify;
pub mod error;
pub mod lyap;
pub mod matops;
pub mod model;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};
