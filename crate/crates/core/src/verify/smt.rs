//! SMT-LIB2 encoding of the bounded consistency query.
//!
//! Output is deterministic for a given problem: agents, steps and weight
//! groups are always emitted in index order.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};

use crate::rational::Rational;

use super::problem::{ToleranceMode, VerificationProblem};

/// Engine-independent description of one bounded query.
///
/// Agents listed with `observed[t][i] = None` do not enter the mismatch
/// count; `offsets[t]` mismatches are charged to step `t` up front.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub horizon: usize,
    pub init_values: Vec<Rational>,
    pub level_values: Vec<Rational>,
    pub init_options: Vec<Vec<usize>>,
    pub lambda_options: Vec<Vec<usize>>,
    pub rows: Vec<Vec<Rational>>,
    pub observed: Vec<Vec<Option<bool>>>,
    pub offsets: Vec<usize>,
    pub budget: usize,
    pub gamma: Rational,
}

impl Encoding {
    pub fn from_problem(problem: &VerificationProblem, mode: ToleranceMode) -> Self {
        let spec = problem.spec_for(mode);
        let grid = &problem.grid;
        Encoding {
            horizon: spec.horizon(),
            init_values: grid.init_values(),
            level_values: grid.levels(),
            init_options: problem.space.init_options.clone(),
            lambda_options: problem.space.lambda_options.clone(),
            rows: grid.w_ab.exact_rows().to_vec(),
            observed: spec
                .observed()
                .iter()
                .map(|y| y.bits().iter().map(|&b| Some(b)).collect())
                .collect(),
            offsets: vec![0; spec.horizon() + 1],
            budget: spec.mismatch_budget(),
            gamma: problem.gamma.clone(),
        }
    }

    pub fn agents(&self) -> usize {
        self.rows.len()
    }

    /// Selection variables in blocking-clause order.
    pub fn selection_names(&self) -> Vec<String> {
        let n = self.agents();
        (0..n)
            .map(|i| format!("init_{i}"))
            .chain((0..n).map(|i| format!("lam_{i}")))
            .collect()
    }

    /// The full script without the trailing `(check-sat)` and `(get-model)`.
    pub fn declarations(&self) -> String {
        let mut out = String::new();
        let n = self.agents();
        out.push_str("(set-option :produce-models true)\n(set-logic QF_LIRA)\n");
        for i in 0..n {
            writeln!(out, "(declare-fun init_{i} () Int)").unwrap();
            writeln!(out, "(declare-fun lam_{i} () Int)").unwrap();
        }
        for t in 0..=self.horizon {
            for i in 0..n {
                writeln!(out, "(declare-fun x_{i}_{t} () Real)").unwrap();
            }
        }
        for t in 0..=self.horizon {
            for i in 0..n {
                writeln!(out, "(declare-fun b_{i}_{t} () Bool)").unwrap();
            }
        }

        for i in 0..n {
            writeln!(out, "(assert {})", selection(&format!("init_{i}"), &self.init_options[i])).unwrap();
            writeln!(out, "(assert {})", selection(&format!("lam_{i}"), &self.lambda_options[i])).unwrap();
        }

        for i in 0..n {
            let opts = &self.init_options[i];
            let value = ite_chain(&format!("init_{i}"), opts, |k| real(&self.init_values[k]));
            writeln!(out, "(assert (= x_{i}_0 {value}))").unwrap();
        }

        for t in 0..self.horizon {
            for i in 0..n {
                let mixed = self.mixing_term(i, t);
                let anchor = format!("x_{i}_0");
                let opts = &self.lambda_options[i];
                let update = ite_chain(&format!("lam_{i}"), opts, |l| {
                    fj_update(&self.level_values[l], "s", &anchor)
                });
                writeln!(out, "(assert (= x_{i}_{} (let ((s {mixed})) {update})))", t + 1).unwrap();
            }
        }

        for t in 0..=self.horizon {
            for i in 0..n {
                writeln!(out, "(assert (= b_{i}_{t} (>= x_{i}_{t} {})))", real(&self.gamma)).unwrap();
            }
        }

        for t in 0..=self.horizon {
            self.write_mismatch(&mut out, t);
        }
        out
    }

    /// `Σ_j w_ij x_j(t)`, terms sharing a weight collected together.
    fn mixing_term(&self, i: usize, t: usize) -> String {
        let mut by_weight: BTreeMap<&Rational, Vec<usize>> = BTreeMap::new();
        for (j, w) in self.rows[i].iter().enumerate() {
            if !w.is_zero() {
                by_weight.entry(w).or_default().push(j);
            }
        }
        let terms: Vec<String> = by_weight
            .iter()
            .map(|(w, js)| {
                let vars = sum(js.iter().map(|j| format!("x_{j}_{t}")).collect());
                if w.is_one() {
                    vars
                } else {
                    format!("(* {} {vars})", real(w))
                }
            })
            .collect();
        if terms.is_empty() {
            "0.0".into()
        } else {
            sum(terms)
        }
    }

    fn write_mismatch(&self, out: &mut String, t: usize) {
        let literals: Vec<String> = (0..self.agents())
            .filter_map(|i| {
                self.observed[t][i].map(|bit| {
                    if bit {
                        format!("(not b_{i}_{t})")
                    } else {
                        format!("b_{i}_{t}")
                    }
                })
            })
            .collect();
        let offset = self.offsets.get(t).copied().unwrap_or(0);
        if offset > self.budget {
            writeln!(out, "(assert false)").unwrap();
            return;
        }
        let allowed = self.budget - offset;
        if allowed >= literals.len() {
            return;
        }
        if allowed == 0 {
            for lit in literals {
                writeln!(out, "(assert (not {lit}))").unwrap();
            }
            return;
        }
        let count = sum(literals.iter().map(|l| format!("(ite {l} 1 0)")).collect());
        writeln!(out, "(assert (<= {count} {allowed}))").unwrap();
    }

    pub fn script(&self) -> String {
        let mut out = self.declarations();
        out.push_str("(check-sat)\n(get-model)\n");
        out
    }
}

fn selection(var: &str, options: &[usize]) -> String {
    match options {
        [] => "false".into(),
        [only] => format!("(= {var} {only})"),
        _ => format!(
            "(or {})",
            options
                .iter()
                .map(|k| format!("(= {var} {k})"))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    }
}

/// Nested if-then-else over the options of a selection variable; the last
/// option is the default branch.
fn ite_chain(var: &str, options: &[usize], value: impl Fn(usize) -> String) -> String {
    let Some((last, rest)) = options.split_last() else {
        return "0.0".into();
    };
    let mut expr = value(*last);
    for &k in rest.iter().rev() {
        expr = format!("(ite (= {var} {k}) {} {expr})", value(k));
    }
    expr
}

/// `(1 - λ) s + λ x(0)` with the trivial cases folded.
fn fj_update(level: &Rational, mixed: &str, anchor: &str) -> String {
    if level.is_zero() {
        mixed.to_string()
    } else if level.is_one() {
        anchor.to_string()
    } else {
        let keep = Rational::one() - level;
        format!("(+ (* {} {mixed}) (* {} {anchor}))", real(&keep), real(level))
    }
}

fn sum(mut terms: Vec<String>) -> String {
    if terms.len() == 1 {
        terms.pop().unwrap()
    } else {
        format!("(+ {})", terms.join(" "))
    }
}

/// Real-sorted literal, e.g. `0.5` becomes `(/ 1.0 2.0)`.
pub(crate) fn real(value: &Rational) -> String {
    let abs = value.abs();
    let body = if abs.denom().is_one() {
        format!("{}.0", abs.numer())
    } else {
        format!("(/ {}.0 {}.0)", abs.numer(), abs.denom())
    };
    if value.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

/// Complete script for the problem at the given tolerance.
pub fn encode_smtlib(problem: &VerificationProblem, mode: ToleranceMode) -> String {
    Encoding::from_problem(problem, mode).script()
}

/// Number of real-sorted variables declared in a script.
pub fn real_variable_count(script: &str) -> usize {
    script
        .lines()
        .filter(|l| l.starts_with("(declare-fun") && l.trim_end().ends_with("() Real)"))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn real_literals() {
        assert_eq!(real(&ratio(3, 4)), "(/ 3.0 4.0)");
        assert_eq!(real(&ratio(-1, 2)), "(- (/ 1.0 2.0))");
        assert_eq!(real(&ratio(7, 1)), "7.0");
    }

    #[test]
    fn ite_chain_uses_last_option_as_default() {
        let e = ite_chain("lam_0", &[0, 2], |k| k.to_string());
        assert_eq!(e, "(ite (= lam_0 0) 0 2)");
        assert_eq!(ite_chain("v", &[5], |k| k.to_string()), "5");
    }

    #[test]
    fn update_folds_extremes() {
        assert_eq!(fj_update(&ratio(0, 1), "s", "a"), "s");
        assert_eq!(fj_update(&ratio(1, 1), "s", "a"), "a");
        assert_eq!(
            fj_update(&ratio(1, 4), "s", "a"),
            "(+ (* (/ 3.0 4.0) s) (* (/ 1.0 4.0) a))"
        );
    }
}
