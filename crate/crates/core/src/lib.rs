//! Friedkin-Johnsen opinion dynamics observed through thresholded binary
//! outputs: simulation, finite abstraction, approximate-simulation
//! certificates and observation-consistency verification by exhaustive
//! enumeration or an external SMT solver.

pub mod abstraction;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod network;
pub mod observation;
pub mod rational;
pub mod verify;

pub use error::{Error, Result};
