//! Exhaustive enumeration over the discretized family, the reference engine.
//!
//! The search is pruned exactly at the first two steps: `x(0)` is the grid
//! value itself, and `x_i(1) = (1 - λ_i)(W x(0))_i + λ_i x_i(0)` depends on
//! agent `i`'s own stubbornness only once `x(0)` is fixed. Both steps are
//! checked in exact arithmetic against the per-step mismatch budget before any
//! full simulation.

use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abstraction::AbstractConfig;
use crate::error::{Error, Result};
use crate::observation::ObservationSpec;
use crate::rational::{self, Rational};

use super::evaluate::Evaluator;
use super::problem::{ToleranceMode, VerificationProblem};
use super::{Engine, Status, Verdict};

pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;
pub const DEFAULT_MAX_WITNESSES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationOptions {
    /// Maximum number of configurations that may reach full simulation.
    pub cap: u128,
    pub max_witnesses: usize,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions {
            cap: DEFAULT_ENUMERATION_CAP,
            max_witnesses: DEFAULT_MAX_WITNESSES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationResult {
    pub count: u64,
    /// Lexicographically smallest satisfying configurations.
    pub witnesses: Vec<AbstractConfig>,
    /// Configurations that survived exact pruning and were simulated.
    pub candidates: u128,
}

/// Per-agent mismatch flags for each admissible option, in option order.
type MismatchTable = Vec<Vec<(usize, bool)>>;

struct Search<'a> {
    problem: &'a VerificationProblem,
    spec: ObservationSpec,
    budget: usize,
    init_options: Vec<Vec<usize>>,
    lambda_options: Vec<Vec<usize>>,
}

impl<'a> Search<'a> {
    fn new(problem: &'a VerificationProblem, mode: ToleranceMode) -> Self {
        let spec = problem.spec_for(mode);
        let budget = spec.mismatch_budget();
        let sorted = |opts: &Vec<Vec<usize>>| -> Vec<Vec<usize>> {
            opts.iter()
                .map(|o| {
                    let mut o = o.clone();
                    o.sort_unstable();
                    o.dedup();
                    o
                })
                .collect()
        };
        Search {
            problem,
            budget,
            init_options: sorted(&problem.space.init_options),
            lambda_options: sorted(&problem.space.lambda_options),
            spec,
        }
    }

    fn n(&self) -> usize {
        self.init_options.len()
    }

    fn init_table(&self) -> MismatchTable {
        let observed = self.spec.at(0);
        (0..self.n())
            .map(|i| {
                self.init_options[i]
                    .iter()
                    .map(|&k| {
                        let bit = self.problem.grid.init_value(k) >= self.problem.gamma;
                        (k, bit != observed.get(i))
                    })
                    .collect()
            })
            .collect()
    }

    /// Mismatch flags at `t = 1` for each stubbornness option, given `x(0)`.
    fn lambda_table(&self, init: &[usize]) -> MismatchTable {
        let grid = &self.problem.grid;
        let n = self.n();
        if self.spec.horizon() == 0 {
            return (0..n)
                .map(|i| self.lambda_options[i].iter().map(|&l| (l, false)).collect())
                .collect();
        }
        let x0: Vec<Rational> = init.iter().map(|&k| grid.init_value(k)).collect();
        let observed = self.spec.at(1);
        let rows = grid.w_ab.exact_rows();
        (0..n)
            .map(|i| {
                let mut mixed = Rational::zero();
                for (w, x) in rows[i].iter().zip(&x0) {
                    if !w.is_zero() {
                        mixed += w * x;
                    }
                }
                self.lambda_options[i]
                    .iter()
                    .map(|&l| {
                        let lv = grid.level_value(l);
                        let x1 = (rational::int(1) - &lv) * &mixed + &lv * &x0[i];
                        let bit = x1 >= self.problem.gamma;
                        (l, bit != observed.get(i))
                    })
                    .collect()
            })
            .collect()
    }
}

/// Number of option vectors with at most `budget` mismatches.
fn count_within_budget(table: &MismatchTable, budget: usize) -> u128 {
    let mut ways = vec![0u128; budget + 1];
    ways[0] = 1;
    for options in table {
        let hits = options.iter().filter(|(_, m)| *m).count() as u128;
        let misses = options.len() as u128 - hits;
        let mut next = vec![0u128; budget + 1];
        for (used, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            next[used] = next[used].saturating_add(w.saturating_mul(misses));
            if used < budget {
                next[used + 1] = next[used + 1].saturating_add(w.saturating_mul(hits));
            }
        }
        ways = next;
    }
    ways.iter().fold(0u128, |a, &b| a.saturating_add(b))
}

/// Depth-first walk over option vectors within the mismatch budget, in
/// lexicographic order. `visit` returns `false` to stop.
fn walk(
    table: &MismatchTable,
    depth: usize,
    remaining: usize,
    prefix: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]) -> bool,
) -> bool {
    if depth == table.len() {
        return visit(prefix);
    }
    for &(value, mismatch) in &table[depth] {
        if mismatch && remaining == 0 {
            continue;
        }
        prefix.push(value);
        let keep_going = walk(
            table,
            depth + 1,
            remaining - usize::from(mismatch),
            prefix,
            visit,
        );
        prefix.pop();
        if !keep_going {
            return false;
        }
    }
    true
}

struct Partial {
    count: u64,
    witnesses: Vec<AbstractConfig>,
}

/// Enumerates every configuration of the search space satisfying the spec
/// at the selected tolerance.
pub fn enumerate(
    problem: &VerificationProblem,
    mode: ToleranceMode,
    options: &EnumerationOptions,
) -> Result<EnumerationResult> {
    enumerate_retaining(problem, mode, options, &|_| true)
}

/// As [`enumerate`], but only satisfying configurations accepted by `retain`
/// are kept as witnesses. The count covers all satisfying configurations.
pub fn enumerate_retaining(
    problem: &VerificationProblem,
    mode: ToleranceMode,
    options: &EnumerationOptions,
    retain: &(dyn Fn(&AbstractConfig) -> bool + Sync),
) -> Result<EnumerationResult> {
    let search = Search::new(problem, mode);
    let budget = search.budget;
    let init_table = search.init_table();
    let init_vectors = count_within_budget(&init_table, budget);
    if init_vectors > options.cap {
        return Err(Error::SearchSpaceOverflow {
            size: init_vectors,
            cap: options.cap,
        });
    }
    let mut inits = Vec::new();
    walk(&init_table, 0, budget, &mut Vec::new(), &mut |v| {
        inits.push(v.to_vec());
        true
    });

    let tables: Vec<MismatchTable> = inits.par_iter().map(|init| search.lambda_table(init)).collect();
    let candidates = tables
        .iter()
        .map(|t| count_within_budget(t, budget))
        .fold(0u128, |a, b| a.saturating_add(b));
    if candidates > options.cap {
        return Err(Error::SearchSpaceOverflow {
            size: candidates,
            cap: options.cap,
        });
    }

    // Work items: (init vector, fixed prefix of stubbornness levels).
    let split = split_depth(&tables);
    let mut tasks: Vec<(usize, Vec<usize>, usize)> = Vec::new();
    for (idx, table) in tables.iter().enumerate() {
        let head: MismatchTable = table[..split].to_vec();
        walk(&head, 0, budget, &mut Vec::new(), &mut |prefix| {
            let used = prefix
                .iter()
                .zip(&head)
                .filter(|(v, opts)| opts.iter().any(|(o, m)| o == *v && *m))
                .count();
            tasks.push((idx, prefix.to_vec(), budget - used));
            true
        });
    }

    let evaluator = Evaluator::new(problem);
    let spec = &search.spec;
    let max_witnesses = options.max_witnesses;
    let partials: Vec<Partial> = tasks
        .par_iter()
        .map(|(idx, prefix, remaining)| {
            let init = &inits[*idx];
            let tail: MismatchTable = tables[*idx][split..].to_vec();
            let mut part = Partial {
                count: 0,
                witnesses: Vec::new(),
            };
            let mut levels = prefix.clone();
            walk(&tail, 0, *remaining, &mut levels, &mut |lambda| {
                let config = AbstractConfig {
                    init_indices: init.clone(),
                    lambda_levels: lambda.to_vec(),
                };
                let outputs = evaluator.outputs(&config);
                if spec.satisfies_outputs(&outputs).expect("horizon matches") {
                    part.count += 1;
                    if part.witnesses.len() < max_witnesses && retain(&config) {
                        part.witnesses.push(config);
                    }
                }
                true
            });
            part
        })
        .collect();

    let count = partials.iter().map(|p| p.count).sum();
    let witnesses = partials
        .into_iter()
        .flat_map(|p| p.witnesses)
        .take(max_witnesses)
        .collect();
    Ok(EnumerationResult {
        count,
        witnesses,
        candidates,
    })
}

/// How many leading agents' stubbornness to fix per parallel task.
fn split_depth(tables: &[MismatchTable]) -> usize {
    let Some(first) = tables.first() else {
        return 0;
    };
    let mut depth = 0;
    let mut width = tables.len();
    while depth < first.len() && width < 256 {
        width *= first[depth].len().max(1);
        depth += 1;
    }
    depth
}

/// Exact verdict by enumeration.
pub fn enumerate_verify(
    problem: &VerificationProblem,
    mode: ToleranceMode,
    options: &EnumerationOptions,
) -> Result<Verdict> {
    let result = enumerate(problem, mode, options)?;
    let status = if result.count > 0 {
        Status::Consistent
    } else {
        Status::Inconsistent
    };
    Ok(Verdict {
        status,
        engine: Engine::Enumeration,
        mode: Some(mode),
        witnesses: result.witnesses,
        solution_count: Some(result.count),
        notices: Vec::new(),
        evidence: None,
        solve_seconds: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_counting_matches_brute_force() {
        let table: MismatchTable = vec![
            vec![(0, false), (1, true)],
            vec![(0, true), (1, true), (2, false)],
            vec![(0, true)],
        ];
        for budget in 0..4 {
            let mut seen = 0u128;
            walk(&table, 0, budget, &mut Vec::new(), &mut |_| {
                seen += 1;
                true
            });
            // brute force over the 6 combinations
            let mut brute = 0u128;
            for a in &table[0] {
                for b in &table[1] {
                    for c in &table[2] {
                        let m = [a.1, b.1, c.1].iter().filter(|&&x| x).count();
                        if m <= budget {
                            brute += 1;
                        }
                    }
                }
            }
            assert_eq!(seen, brute);
            assert_eq!(count_within_budget(&table, budget), brute);
        }
    }

    #[test]
    fn walk_is_lexicographic() {
        let table: MismatchTable = vec![vec![(0, false), (2, false)], vec![(1, false), (3, false)]];
        let mut order = Vec::new();
        walk(&table, 0, 0, &mut Vec::new(), &mut |v| {
            order.push(v.to_vec());
            true
        });
        assert_eq!(order, vec![vec![0, 1], vec![0, 3], vec![2, 1], vec![2, 3]]);
    }
}
