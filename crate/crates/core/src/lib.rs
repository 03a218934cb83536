//! Finite-dimensional operator theory over a positive-semidefinite metric.

pub mod block;
pub mod bounds;
pub mod error;
pub mod harness;
pub mod io;
pub mod matrix;
pub mod numerics;
pub mod operator;
pub mod space;

pub use error::{Error, Result};
pub use matrix::{C64, ComplexMatrix};
