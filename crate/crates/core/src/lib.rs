pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod scattering;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
