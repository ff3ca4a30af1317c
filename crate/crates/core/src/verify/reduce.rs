//! Structural reduction by groups of totally stubborn agents.
//!
//! Agents with `λ_i = 1` never move. Those sharing a community and an initial
//! value have identical constant trajectories, so each such group can be
//! replaced by one representative: a free agent's weight onto the
//! representative is the sum of its weights onto the members. Free-agent
//! trajectories are unchanged.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::abstraction::AbstractConfig;
use crate::dynamics::{InfluenceMatrix, ModelConfig, StubbornnessVector};
use crate::error::{Error, Result};
use crate::network::Communities;
use crate::rational::{self, Rational};

use super::model::{model_selections, validate_assignment};
use super::problem::{ToleranceMode, VerificationProblem};
use super::smt::Encoding;
use super::solver::{run_solver, SolverConfig, SolverOutcome};
use super::{Engine, Status, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubbornGroup {
    pub community: usize,
    #[serde(with = "rational::serde_str")]
    pub init_value: Rational,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReduction {
    pub free: Vec<usize>,
    pub stubborn: Vec<usize>,
    pub groups: Vec<StubbornGroup>,
}

impl GroupReduction {
    /// Free agents plus one representative per group.
    pub fn dim(&self) -> usize {
        self.free.len() + self.groups.len()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.members.len()).collect()
    }

    /// Reduced influence rows: free agents first, then representatives with
    /// a unit self-weight.
    fn reduced_rows(&self, rows: &[Vec<Rational>]) -> Result<Vec<Vec<Rational>>> {
        let m = self.dim();
        let nf = self.free.len();
        let mut out = Vec::with_capacity(m);
        for &i in &self.free {
            let mut row: Vec<Rational> = self.free.iter().map(|&j| rows[i][j].clone()).collect();
            for (g, group) in self.groups.iter().enumerate() {
                let first = &rows[i][group.members[0]];
                if group.members.iter().any(|&j| &rows[i][j] != first) {
                    return Err(Error::Reduction(format!(
                        "agent {i} weights members of stubborn group {g} unequally"
                    )));
                }
                row.push(first * Rational::from_integer(group.members.len().into()));
            }
            out.push(row);
        }
        for g in 0..self.groups.len() {
            let mut row = vec![Rational::zero(); m];
            row[nf + g] = Rational::one();
            out.push(row);
        }
        Ok(out)
    }
}

/// Partition of the stubborn agents by `(community, initial value)`.
fn partition(
    n: usize,
    stubborn: impl Fn(usize) -> bool,
    init: impl Fn(usize) -> Rational,
    communities: &Communities,
) -> GroupReduction {
    let mut free = Vec::new();
    let mut stubborn_agents = Vec::new();
    let mut keyed: BTreeMap<(usize, Rational), Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        if stubborn(i) {
            stubborn_agents.push(i);
            keyed.entry((communities.label(i), init(i))).or_default().push(i);
        } else {
            free.push(i);
        }
    }
    let groups = keyed
        .into_iter()
        .map(|((community, init_value), members)| StubbornGroup {
            community,
            init_value,
            members,
        })
        .collect();
    GroupReduction {
        free,
        stubborn: stubborn_agents,
        groups,
    }
}

/// Reduces a concrete configuration. The reduced state lists free agents in
/// increasing index order, then one representative per group.
pub fn group_reduce(config: &ModelConfig, communities: &Communities) -> Result<(GroupReduction, ModelConfig)> {
    let n = config.dim();
    crate::error::check_len(n, communities.len())?;
    let lambda = config.lambda.as_slice();
    let reduction = partition(
        n,
        |i| lambda[i] == 1.0,
        |i| rational::from_f64_exact(config.x_init[i]).expect("validated finite"),
        communities,
    );
    let rows = reduction.reduced_rows(config.w.exact_rows())?;
    let w = InfluenceMatrix::from_rationals(rows)?;
    let mut x = Vec::with_capacity(reduction.dim());
    let mut l = Vec::with_capacity(reduction.dim());
    for &i in &reduction.free {
        x.push(config.x_init[i]);
        l.push(lambda[i]);
    }
    for g in &reduction.groups {
        x.push(rational::to_f64(&g.init_value));
        l.push(1.0);
    }
    let reduced = ModelConfig::new(x, StubbornnessVector::new(l)?, w)?;
    Ok((reduction, reduced))
}

/// A verification problem whose stubborn agents are known, together with its
/// reduced encoding data.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProblem {
    /// The full problem with every stubborn agent pinned to its known init
    /// index and to stubbornness 1.
    pub full: VerificationProblem,
    pub reduction: GroupReduction,
    /// Init grid index of each group, parallel to `reduction.groups`.
    pub group_indices: Vec<usize>,
    reduced_rows: Vec<Vec<Rational>>,
}

/// Pins the given `(agent, init index)` pairs as totally stubborn and groups
/// them by community and initial value.
pub fn reduce_problem(
    problem: &VerificationProblem,
    communities: &Communities,
    stubborn: &[(usize, usize)],
) -> Result<ReducedProblem> {
    let n = problem.agents();
    crate::error::check_len(n, communities.len())?;
    let grid = &problem.grid;
    let top = grid.level_count() - 1;
    let mut space = problem.space.clone();
    let mut pinned = vec![None; n];
    for &(i, k) in stubborn {
        if i >= n {
            return Err(Error::OutOfRange(format!("stubborn agent {i} outside 0..{n}")));
        }
        if !space.init_options[i].contains(&k) || !space.lambda_options[i].contains(&top) {
            return Err(Error::Reduction(format!(
                "agent {i} cannot be pinned to init index {k} with stubbornness 1 within the search space"
            )));
        }
        space.init_options[i] = vec![k];
        space.lambda_options[i] = vec![top];
        pinned[i] = Some(k);
    }
    let full = problem.with_space(space)?;
    let reduction = partition(
        n,
        |i| pinned[i].is_some(),
        |i| grid.init_value(pinned[i].expect("pinned")),
        communities,
    );
    let group_indices = reduction
        .groups
        .iter()
        .map(|g| pinned[g.members[0]].expect("pinned"))
        .collect();
    let reduced_rows = reduction.reduced_rows(grid.w_ab.exact_rows())?;
    Ok(ReducedProblem {
        full,
        reduction,
        group_indices,
        reduced_rows,
    })
}

impl ReducedProblem {
    pub fn encoding(&self, mode: ToleranceMode) -> Encoding {
        let full = Encoding::from_problem(&self.full, mode);
        let r = &self.reduction;
        let top = self.full.grid.level_count() - 1;
        let mut init_options = Vec::with_capacity(r.dim());
        let mut lambda_options = Vec::with_capacity(r.dim());
        for &i in &r.free {
            init_options.push(full.init_options[i].clone());
            lambda_options.push(full.lambda_options[i].clone());
        }
        for &k in &self.group_indices {
            init_options.push(vec![k]);
            lambda_options.push(vec![top]);
        }
        let mut observed = Vec::with_capacity(full.horizon + 1);
        let mut offsets = Vec::with_capacity(full.horizon + 1);
        for step in &full.observed {
            let mut row: Vec<Option<bool>> = r.free.iter().map(|&i| step[i]).collect();
            row.extend(std::iter::repeat(None).take(r.groups.len()));
            observed.push(row);
            let mut charged = 0;
            for g in &r.groups {
                let bit = g.init_value >= full.gamma;
                charged += g.members.iter().filter(|&&j| step[j] != Some(bit)).count();
            }
            offsets.push(charged);
        }
        Encoding {
            horizon: full.horizon,
            init_values: full.init_values,
            level_values: full.level_values,
            init_options,
            lambda_options,
            rows: self.reduced_rows.clone(),
            observed,
            offsets,
            budget: full.budget,
            gamma: full.gamma,
        }
    }

    /// Maps reduced selections back to a full configuration and validates it
    /// against the full problem.
    pub fn expand(&self, reduced: &[i64], mode: ToleranceMode) -> Result<AbstractConfig> {
        let m = self.reduction.dim();
        let n = self.full.agents();
        if reduced.len() != 2 * m {
            return Err(Error::ModelValidation(format!(
                "expected {} reduced selections, got {}",
                2 * m,
                reduced.len()
            )));
        }
        let mut flat = vec![0i64; 2 * n];
        for i in 0..n {
            flat[i] = self.full.space.init_options[i][0] as i64;
            flat[n + i] = self.full.space.lambda_options[i][0] as i64;
        }
        for (r, &i) in self.reduction.free.iter().enumerate() {
            flat[i] = reduced[r];
            flat[n + i] = reduced[m + r];
        }
        validate_assignment(&flat, n, &self.full, mode)
    }

    /// Solves the reduced encoding; a SAT witness is expanded and checked
    /// against the full problem.
    pub fn smt_verify(&self, mode: ToleranceMode, config: &SolverConfig) -> Result<Verdict> {
        let script = smt_for_reduced(self, mode);
        let run = run_solver(&script, config)?;
        let mut verdict = match run.outcome {
            SolverOutcome::Sat(model) => {
                let values = model_selections(&model, self.reduction.dim())?;
                let mut v = Verdict::new(Status::Consistent, Engine::Smt, Some(mode));
                v.witnesses.push(self.expand(&values, mode)?);
                v
            }
            SolverOutcome::Unsat => Verdict::new(Status::Inconsistent, Engine::Smt, Some(mode)),
            SolverOutcome::Unknown(reason) => {
                let mut v = Verdict::new(Status::Inconclusive, Engine::Smt, Some(mode));
                v.notices.push(format!("solver: {reason}"));
                v
            }
        };
        verdict.solve_seconds = Some(run.elapsed.as_secs_f64());
        Ok(verdict)
    }
}

pub fn smt_for_reduced(reduced: &ReducedProblem, mode: ToleranceMode) -> String {
    reduced.encoding(mode).script()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_stubborn_agents_is_identity() {
        let w = InfluenceMatrix::uniform(3);
        let config = ModelConfig::new(vec![0.1, 0.6, 0.9], StubbornnessVector::new(vec![0.2, 0.0, 0.5]).unwrap(), w.clone())
            .unwrap();
        let (red, reduced) = group_reduce(&config, &Communities::new(vec![0, 0, 1])).unwrap();
        assert!(red.groups.is_empty());
        assert_eq!(reduced, config);
    }

    #[test]
    fn all_stubborn_is_constant() {
        let w = InfluenceMatrix::uniform(4);
        let config =
            ModelConfig::new(vec![0.25, 0.25, 0.75, 0.25], StubbornnessVector::constant(4, 1.0).unwrap(), w).unwrap();
        let (red, reduced) = group_reduce(&config, &Communities::new(vec![0, 0, 0, 1])).unwrap();
        assert_eq!(red.groups.len(), 3);
        assert_eq!(red.cardinalities(), vec![2, 1, 1]);
        let traj = reduced.simulate(5, 0.5).unwrap();
        for t in 0..=5 {
            assert_eq!(traj.opinions(t), traj.opinions(0));
        }
    }

    #[test]
    fn unequal_weights_onto_a_group_are_rejected() {
        let rows = vec![
            vec![rational::ratio(1, 2), rational::ratio(1, 3), rational::ratio(1, 6)],
            vec![Rational::zero(), Rational::one(), Rational::zero()],
            vec![Rational::zero(), Rational::zero(), Rational::one()],
        ];
        let w = InfluenceMatrix::from_rationals(rows).unwrap();
        let config =
            ModelConfig::new(vec![0.1, 0.75, 0.75], StubbornnessVector::new(vec![0.0, 1.0, 1.0]).unwrap(), w).unwrap();
        assert!(matches!(
            group_reduce(&config, &Communities::new(vec![0, 1, 1])),
            Err(Error::Reduction(_))
        ));
    }
}
