//! Constructive Kolmogorov superposition on all of `R^m`.

pub mod error;
pub mod exactnum;
pub mod globaldec;
pub mod grids;
pub mod cells;
pub mod decompose;
pub mod inner;
pub mod io;
pub mod pwl;
pub mod targets;

pub use error::{KstError, Result};
pub use exactnum::Rational;
