pub mod cli;
pub mod error;
pub mod hecke;
pub mod lattice;
pub mod qmoments;
pub mod sampler;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
