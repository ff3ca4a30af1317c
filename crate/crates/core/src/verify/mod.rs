//! Observation-consistency verification over the finite abstract family.
//!
//! Two engines decide the same question: exhaustive enumeration (the oracle)
//! and an SMT encoding handed to an external solver. Results at tolerances
//! `κ + δ` and `κ - δ` are combined by [`transfer_verdict`] into a statement
//! about the concrete family.

mod count;
mod enumerate;
mod evaluate;
mod model;
mod problem;
mod reduce;
mod sexpr;
mod smt;
mod solver;
mod transfer;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::abstraction::{AbstractConfig, BoxEvidence};

pub use count::{count_solutions, count_with_enumeration, count_with_solver, CountEngine};
pub use enumerate::{
    enumerate, enumerate_verify, EnumerationOptions, EnumerationResult, DEFAULT_ENUMERATION_CAP,
    DEFAULT_MAX_WITNESSES,
};
pub use evaluate::{Evaluator, EXACT_MARGIN};
pub use model::{parse_assignment, parse_model};
pub use problem::{ToleranceMode, VerificationProblem};
pub use reduce::{
    group_reduce, reduce_problem, smt_for_reduced, GroupReduction, ReducedProblem, StubbornGroup,
};
pub use smt::{encode_smtlib, real_variable_count, Encoding};
pub use solver::{
    run_solver, smt_verify, SmtSession, SolverConfig, SolverOutcome, SolverRun,
    DEFAULT_SOLVER_COMMAND, DEFAULT_TIMEOUT_SECS,
};
pub use transfer::{transfer_verdict, verify_box, verify_problem, EngineChoice, TransferReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Consistent,
    Inconsistent,
    Inconclusive,
}

impl Status {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Consistent => 0,
            Status::Inconsistent => 1,
            Status::Inconclusive => 2,
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Consistent => "CONSISTENT",
            Status::Inconsistent => "INCONSISTENT",
            Status::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Engine {
    Enumeration,
    Smt,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Enumeration => "ENUMERATION",
            Engine::Smt => "SMT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    pub engine: Engine,
    /// Tolerance the abstract family was checked at; `None` after transfer.
    pub mode: Option<ToleranceMode>,
    pub witnesses: Vec<AbstractConfig>,
    pub solution_count: Option<u64>,
    pub notices: Vec<String>,
    pub evidence: Option<BoxEvidence>,
    /// Wall-clock time of the solver process, when one was run.
    pub solve_seconds: Option<f64>,
}

impl Verdict {
    pub fn new(status: Status, engine: Engine, mode: Option<ToleranceMode>) -> Self {
        Verdict {
            status,
            engine,
            mode,
            witnesses: Vec::new(),
            solution_count: None,
            notices: Vec::new(),
            evidence: None,
            solve_seconds: None,
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.status == Status::Consistent
    }
}
