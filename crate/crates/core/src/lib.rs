// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod ed_oracle;
pub mod error;
pub mod ising_ff;
pub mod numkernel;
pub mod quench_lab;
pub mod scaling;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
