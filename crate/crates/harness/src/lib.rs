//! Configuration, instance generation, seeded experiments and the command
//! line front end `fjv` for fj-core.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod instances;
pub mod report;

pub use error::{HarnessError, Result};
