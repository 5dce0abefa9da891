//! Pseudo-spectral mean-field particle solver for 2D incompressible flow.

pub mod error;
pub mod harness;
pub mod noise;
pub mod reference;
pub mod sde;
pub mod snapshot;
pub mod spectral;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
