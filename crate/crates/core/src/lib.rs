//! Moment-kernel approximation operators, modulars, filter convergence and
//! Itô integration experiments on uniform grids.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod filters;
pub mod lattice;
pub mod modulars;
pub mod moment_ops;
pub mod profiles;
pub mod quadrature;
pub mod stats;
pub mod stochastic;

pub use error::{Error, Result};
