pub mod catalog;
pub mod checks;
pub mod cone;
pub mod convolution;
pub mod cotangent;
pub mod distribution;
pub mod error;
pub mod grid;
pub mod models;
pub mod spectral;
pub mod wavefront;

pub use error::{GrpdError, Result};
