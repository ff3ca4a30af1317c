//! From abstract verdicts to statements about the concrete family.
//!
//! If every abstract configuration violates the spec at `κ + δ`, no concrete
//! configuration of the box satisfies it at `κ`. If some abstract
//! configuration satisfies it at `κ - δ` and its trajectory keeps few agents
//! near the threshold, some concrete configuration satisfies it at `κ`.
//! Anything else is inconclusive.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::abstraction::{assumption2_check, cover_set, sample_box_evidence, AbstractConfig, AbstractGrid, ConfigBox};
use crate::dynamics::InfluenceMatrix;
use crate::error::Result;
use crate::observation::ObservationSpec;
use crate::rational::{self, Rational};

use super::enumerate::{enumerate_retaining, EnumerationOptions};
use super::model::validate_assignment;
use super::problem::{ToleranceMode, VerificationProblem};
use super::smt::Encoding;
use super::solver::{smt_verify, SmtSession, SolverConfig, SolverOutcome};
use super::{Engine, Status, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EngineChoice {
    Enumeration(EnumerationOptions),
    Smt(SolverConfig),
}

impl EngineChoice {
    pub fn engine(&self) -> Engine {
        match self {
            EngineChoice::Enumeration(_) => Engine::Enumeration,
            EngineChoice::Smt(_) => Engine::Smt,
        }
    }
}

/// Combined verdict plus the two abstract runs it was derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub verdict: Verdict,
    pub plus: Verdict,
    pub minus: Option<Verdict>,
}

/// Combines abstract results at `κ + δ` and `κ - δ`.
///
/// `minus` is ignored when `κ < δ`. Only witnesses of `minus` accepted by
/// `passes_assumption2` can establish consistency.
pub fn transfer_verdict(
    plus: &Verdict,
    minus: Option<&Verdict>,
    passes_assumption2: &dyn Fn(&AbstractConfig) -> bool,
    delta: &Rational,
    kappa: &Rational,
) -> Verdict {
    let engine = plus.engine;
    let mut out = Verdict::new(Status::Inconclusive, engine, None);
    out.notices.extend(plus.notices.iter().cloned());
    if plus.status == Status::Inconsistent {
        out.status = Status::Inconsistent;
        out.notices
            .push("every abstract configuration violates the spec at kappa+delta".into());
        return out;
    }
    if kappa < delta {
        out.notices.push(format!(
            "kappa = {} < delta = {}: the sufficient-condition check is skipped",
            rational::format_rational(kappa),
            rational::format_rational(delta)
        ));
        return out;
    }
    let Some(minus) = minus else {
        out.notices.push("no result at kappa-delta".into());
        return out;
    };
    out.notices.extend(minus.notices.iter().cloned());
    let passing: Vec<AbstractConfig> = minus
        .witnesses
        .iter()
        .filter(|c| passes_assumption2(c))
        .cloned()
        .collect();
    match minus.status {
        Status::Consistent if !passing.is_empty() => {
            out.status = Status::Consistent;
            out.witnesses = passing;
            out.solution_count = minus.solution_count;
        }
        Status::Consistent => {
            out.notices.push(
                "satisfying abstract configurations at kappa-delta were found, but none retained passes the near-threshold check"
                    .into(),
            );
        }
        _ => out
            .notices
            .push("abstract family satisfies kappa+delta but not kappa-delta".into()),
    }
    out
}

/// Near-threshold check on the abstract trajectory of `config`.
fn assumption2_for(problem: &VerificationProblem, config: &AbstractConfig) -> bool {
    let Ok(model) = config.to_model(&problem.grid) else {
        return false;
    };
    match model.simulate(problem.horizon(), problem.gamma_f64()) {
        Ok(traj) => assumption2_check(&traj, problem.delta_f64(), problem.gamma_f64()),
        Err(_) => false,
    }
}

/// SMT search for satisfying configurations that also pass `retain`,
/// blocking each rejected assignment. Gives up after `max_tries` models.
fn smt_search(
    problem: &VerificationProblem,
    mode: ToleranceMode,
    config: &SolverConfig,
    retain: &dyn Fn(&AbstractConfig) -> bool,
    max_tries: usize,
) -> Result<Verdict> {
    let encoding = Encoding::from_problem(problem, mode);
    let names = encoding.selection_names();
    let n = encoding.agents();
    let mut session = SmtSession::start(config)?;
    session.send(&encoding.declarations())?;
    let mut found_any = false;
    for _ in 0..max_tries.max(1) {
        match session.check_sat()? {
            Some(SolverOutcome::Unsat) => {
                let status = if found_any {
                    Status::Consistent
                } else {
                    Status::Inconsistent
                };
                return Ok(Verdict::new(status, Engine::Smt, Some(mode)));
            }
            Some(SolverOutcome::Unknown(reason)) => {
                let mut v = Verdict::new(Status::Inconclusive, Engine::Smt, Some(mode));
                v.notices.push(format!("solver: {reason}"));
                return Ok(v);
            }
            None => {
                let mut v = Verdict::new(Status::Inconclusive, Engine::Smt, Some(mode));
                v.notices.push(format!("solver: timeout after {} s", config.timeout_secs));
                return Ok(v);
            }
            Some(SolverOutcome::Sat(_)) => {}
        }
        let values = session.get_values(&names)?;
        let witness = validate_assignment(&values, n, problem, mode)?;
        found_any = true;
        if retain(&witness) {
            let mut v = Verdict::new(Status::Consistent, Engine::Smt, Some(mode));
            v.witnesses.push(witness);
            return Ok(v);
        }
        let clause = names
            .iter()
            .zip(witness.init_indices.iter().chain(&witness.lambda_levels))
            .map(|(name, v)| format!("(= {name} {v})"))
            .collect::<Vec<_>>()
            .join(" ");
        session.send(&format!("(assert (not (and {clause})))"))?;
    }
    let mut v = Verdict::new(Status::Consistent, Engine::Smt, Some(mode));
    v.notices
        .push(format!("no near-threshold-compliant witness among {max_tries} models"));
    Ok(v)
}

/// Runs the selected engine at `κ + δ` and, when `κ ≥ δ`, at `κ - δ`, then
/// transfers the results.
pub fn verify_problem(problem: &VerificationProblem, engine: &EngineChoice) -> Result<TransferReport> {
    let a2 = |c: &AbstractConfig| assumption2_for(problem, c);
    let kappa = problem.spec.kappa().clone();
    let run_plus = |mode| -> Result<Verdict> {
        match engine {
            EngineChoice::Enumeration(opts) => super::enumerate::enumerate_verify(problem, mode, opts),
            EngineChoice::Smt(cfg) => smt_verify(problem, mode, cfg),
        }
    };
    let plus = run_plus(ToleranceMode::KappaPlusDelta)?;
    let minus = if plus.status != Status::Inconsistent && kappa >= problem.delta {
        Some(match engine {
            EngineChoice::Enumeration(opts) => {
                let r = enumerate_retaining(problem, ToleranceMode::KappaMinusDelta, opts, &a2)?;
                let mut v = Verdict::new(
                    if r.count > 0 {
                        Status::Consistent
                    } else {
                        Status::Inconsistent
                    },
                    Engine::Enumeration,
                    Some(ToleranceMode::KappaMinusDelta),
                );
                v.witnesses = r.witnesses;
                v.solution_count = Some(r.count);
                v
            }
            EngineChoice::Smt(cfg) => smt_search(
                problem,
                ToleranceMode::KappaMinusDelta,
                cfg,
                &a2,
                super::enumerate::DEFAULT_MAX_WITNESSES,
            )?,
        })
    } else {
        None
    };
    let verdict = transfer_verdict(&plus, minus.as_ref(), &a2, &problem.delta, &kappa);
    Ok(TransferReport { verdict, plus, minus })
}

/// Verifies a continuous configuration box: builds its cover set, decides
/// the abstract problem and attaches sampled evidence for the box.
#[allow(clippy::too_many_arguments)]
pub fn verify_box<R: Rng>(
    pi_star: &ConfigBox,
    w: &InfluenceMatrix,
    grid: &AbstractGrid,
    spec: ObservationSpec,
    delta: Rational,
    gamma: Rational,
    engine: &EngineChoice,
    evidence_samples: usize,
    rng: &mut R,
) -> Result<TransferReport> {
    let space = cover_set(pi_star, grid)?;
    let horizon = spec.horizon();
    let problem = VerificationProblem::new(spec, grid.clone(), space, delta, gamma)?;
    let mut report = verify_problem(&problem, engine)?;
    if evidence_samples > 0 {
        let ev = sample_box_evidence(
            pi_star,
            w,
            grid,
            problem.delta_f64(),
            horizon,
            problem.gamma_f64(),
            evidence_samples,
            rng,
        )?;
        if !ev.all_hold() {
            report
                .verdict
                .notices
                .push("sampled evidence does not support every hypothesis of the transfer on this box".into());
        }
        report.verdict.evidence = Some(ev);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn verdict(status: Status, witnesses: usize) -> Verdict {
        let mut v = Verdict::new(status, Engine::Enumeration, None);
        v.witnesses = (0..witnesses)
            .map(|k| AbstractConfig {
                init_indices: vec![k],
                lambda_levels: vec![0],
            })
            .collect();
        v
    }

    #[test]
    fn all_violating_is_inconsistent() {
        let v = transfer_verdict(&verdict(Status::Inconsistent, 0), None, &|_| true, &ratio(1, 10), &ratio(1, 5));
        assert_eq!(v.status, Status::Inconsistent);
    }

    #[test]
    fn satisfying_with_near_threshold_ok_is_consistent() {
        let plus = verdict(Status::Consistent, 2);
        let minus = verdict(Status::Consistent, 2);
        let v = transfer_verdict(&plus, Some(&minus), &|c| c.init_indices[0] == 1, &ratio(1, 10), &ratio(1, 5));
        assert_eq!(v.status, Status::Consistent);
        assert_eq!(v.witnesses.len(), 1);
        let v = transfer_verdict(&plus, Some(&minus), &|_| false, &ratio(1, 10), &ratio(1, 5));
        assert_eq!(v.status, Status::Inconclusive);
    }

    #[test]
    fn gap_is_inconclusive() {
        let plus = verdict(Status::Consistent, 1);
        let minus = verdict(Status::Inconsistent, 0);
        let v = transfer_verdict(&plus, Some(&minus), &|_| true, &ratio(1, 10), &ratio(1, 5));
        assert_eq!(v.status, Status::Inconclusive);
    }

    #[test]
    fn small_kappa_skips_part_two() {
        let plus = verdict(Status::Consistent, 1);
        let minus = verdict(Status::Consistent, 1);
        let v = transfer_verdict(&plus, Some(&minus), &|_| true, &ratio(1, 5), &ratio(1, 10));
        assert_eq!(v.status, Status::Inconclusive);
        assert!(v.notices.iter().any(|n| n.contains("skipped")));
    }

    #[test]
    fn unknown_never_becomes_inconsistent() {
        let plus = verdict(Status::Inconclusive, 0);
        let v = transfer_verdict(&plus, None, &|_| true, &ratio(1, 10), &ratio(1, 5));
        assert_eq!(v.status, Status::Inconclusive);
    }
}
