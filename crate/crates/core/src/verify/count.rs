//! Solution counting under a stubbornness window `‖Λ - Λ̂‖ ≤ ε_Λ`.
//!
//! For diagonal `Λ` the spectral norm is the largest absolute entry, so the
//! window is a per-agent restriction of the admissible levels. Counted
//! objects are distinct full selections (init indices and levels), not
//! distinct output sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

use super::enumerate::{enumerate, EnumerationOptions};
use super::problem::{ToleranceMode, VerificationProblem};
use super::solver::{count_by_blocking, SolverConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CountEngine {
    Enumeration(EnumerationOptions),
    Smt(SolverConfig),
}

pub fn count_with_enumeration(
    problem: &VerificationProblem,
    mode: ToleranceMode,
    options: &EnumerationOptions,
) -> Result<u64> {
    let opts = EnumerationOptions {
        max_witnesses: 0,
        ..*options
    };
    Ok(enumerate(problem, mode, &opts)?.count)
}

/// Blocking-clause count; a solver that gives up is an error here since a
/// partial count is not a count.
pub fn count_with_solver(problem: &VerificationProblem, mode: ToleranceMode, config: &SolverConfig) -> Result<u64> {
    count_by_blocking(problem, mode, config, None)?
        .ok_or_else(|| Error::Solver("solver returned unknown or timed out while counting".into()))
}

/// Number of selections satisfying the spec at tolerance `κ` with every
/// level within `eps_lambda` of `lambda_hat`.
pub fn count_solutions(
    problem: &VerificationProblem,
    lambda_hat: &[Rational],
    eps_lambda: &Rational,
    engine: &CountEngine,
) -> Result<u64> {
    let restricted = problem.with_lambda_window(lambda_hat, eps_lambda)?;
    if restricted.space.is_empty() {
        return Ok(0);
    }
    match engine {
        CountEngine::Enumeration(opts) => count_with_enumeration(&restricted, ToleranceMode::Kappa, opts),
        CountEngine::Smt(cfg) => count_with_solver(&restricted, ToleranceMode::Kappa, cfg),
    }
}
