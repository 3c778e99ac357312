//! Thinned log-Gaussian Cox processes on raster grids: simulation,
//! Laplace-approximate inference and residual diagnostics.

pub mod bessel;
pub mod config;
pub mod detection;
pub mod diagnostics;
pub mod error;
pub mod gp;
pub mod inference;
pub mod sim;
pub mod spatial;
pub mod util;
pub mod workflow;

pub use error::{Error, Result};
