//! Seeded experiments. Each writes CSV files with rows sorted by a declared
//! key, so a run is byte-reproducible from its configuration.

pub mod approx_error;
pub mod count_solutions;
pub mod interpolation;
pub mod structural_runtime;
pub mod verify;

use std::path::Path;

use crate::config::{ExperimentConfig, ExperimentId};
use crate::error::Result;
use crate::report::Outcome;

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    match cfg.experiment {
        ExperimentId::ApproxError => approx_error::run(cfg, out),
        ExperimentId::Interpolation => interpolation::run(cfg, out),
        ExperimentId::CountSolutions => count_solutions::run(cfg, out),
        ExperimentId::StructuralRuntime => structural_runtime::run(cfg, out),
        ExperimentId::Verify => verify::run(cfg, out),
    }
}
