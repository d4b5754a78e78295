pub mod error;
pub mod harness;
pub mod heat;
pub mod mild;
pub mod profile;
pub mod quad;
pub mod rng;
pub mod spaces;
pub mod spectral;
pub mod stats;
pub mod stochastic;

pub use error::{Error, Result};
