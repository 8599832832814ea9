#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autograd;
pub mod data;
pub mod error;
pub mod rng;

pub use error::{Error, Result};
pub mod disentangle;
pub mod zoo;
pub mod train;
pub mod dgp;
pub mod eval;
pub mod ihdp;
pub mod bench;
