//! Simulation and data reduction for NV-centre ensemble magnetometry.

pub mod cli;
pub mod error;
pub mod fit;
pub mod fixtures;
pub mod implant;
pub mod magnetometry;
pub mod scan;
pub mod sequence;
pub mod spin;

pub use error::{Error, Result};
