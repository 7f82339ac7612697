// `!(x > 0.0)` also rejects NaN, which is the intent throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::type_complexity)]

pub mod bsde;
pub mod builtins;
pub mod cli;
pub mod config;
pub mod dbde;
pub mod error;
pub mod grid;
pub mod quadrature;
pub mod regularize;
pub mod search;
pub mod weights;

pub use error::{Error, Result};
