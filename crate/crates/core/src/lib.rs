pub mod diagram;
pub mod divergence;
pub mod error;
pub mod exp_family;
pub mod geometry;
pub mod planar;
pub mod sampling;
pub mod tol;
pub mod triangulation;

pub use divergence::{Domain, Generator};
pub use error::{Error, Result};
