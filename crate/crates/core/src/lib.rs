// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod grid;
pub mod planners;
pub mod ppm;
pub mod seeding;
pub mod terrain;
pub mod traversability;

pub use error::{Error, Result};
