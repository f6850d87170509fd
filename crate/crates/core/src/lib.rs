//! Wyner-Ziv quantization workbench built on dithered scalar modulo lattices
//! and multilevel polar codes.

// `!(x > 0.0)` guards are deliberate: they reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codecs;
pub mod error;
pub mod gauss_core;
pub mod lattice;
pub mod numerics;
pub mod polar;
pub mod rd_theory;
pub mod selftest;
pub mod sim;
pub mod vector;

pub use error::{Error, Result};
