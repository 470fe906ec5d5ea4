#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod bernstein;
pub mod cli;
pub mod cone;
pub mod error;
pub mod law;
pub mod levels;
pub mod lorentz;
pub mod profile;
pub mod quadrature;
pub mod rearrange;
pub mod selftest;
pub mod sobolev;

pub use error::{Error, Result};
