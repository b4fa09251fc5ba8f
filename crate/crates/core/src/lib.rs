//! Successive Galerkin approximation of scalar infinite-horizon HJB equations
//! in a Hermite basis. The Galerkin integrals are produced by difference
//! operators that annihilate them, starting from a handful of values obtained
//! by Gauss–Hermite quadrature.

#![allow(
    clippy::len_without_is_empty,
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord
)]

pub mod cli;
pub mod control;
pub mod error;
pub mod galerkin;
pub mod hermite;
pub mod integrals;
pub mod operator;
pub mod problem;
pub mod recurrence;
pub mod table;

pub use error::{Error, Result};
