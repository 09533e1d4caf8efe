#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod frac_calc;
pub mod mittag_leffler;
pub mod psi;
pub mod solver;
pub mod special;
pub mod stability;
pub mod volterra;

pub use error::{Error, Result};
