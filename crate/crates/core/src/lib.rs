pub mod bands;
pub mod coverage;
pub mod detect;
pub mod error;
pub mod grid;
pub mod io;
pub mod multires;
pub mod polyhedron;
pub mod regularize;
pub mod tautstring;

pub use error::{Error, Result};
