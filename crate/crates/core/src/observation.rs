//! Observation-consistency specification: a per-step conjunction of
//! predicates `κ - ‖y(t) - ỹ(t)‖_H ≥ 0` over an observed binary sequence.
//!
//! Comparisons are exact: Hamming distances are multiples of `1/n` and `κ` is
//! a rational.

use std::io::Read;
use std::path::Path;

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::dynamics::{hamming_exact, BinaryOutput, Trajectory};
use crate::error::{check_len, Error, Result};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSpec {
    observed: Vec<BinaryOutput>,
    kappa: Rational,
}

impl ObservationSpec {
    pub fn new(observed: Vec<BinaryOutput>, kappa: Rational) -> Result<Self> {
        if kappa.is_negative() {
            return Err(Error::OutOfRange(format!(
                "kappa = {} must be >= 0",
                rational::format_rational(&kappa)
            )));
        }
        if observed.is_empty() {
            return Err(Error::OutOfRange("observation sequence is empty".into()));
        }
        let n = observed[0].len();
        for y in &observed {
            check_len(n, y.len())?;
        }
        Ok(ObservationSpec { observed, kappa })
    }

    pub fn with_kappa(&self, kappa: Rational) -> Result<Self> {
        Self::new(self.observed.clone(), kappa)
    }

    pub fn horizon(&self) -> usize {
        self.observed.len() - 1
    }

    pub fn agents(&self) -> usize {
        self.observed[0].len()
    }

    pub fn kappa(&self) -> &Rational {
        &self.kappa
    }

    pub fn observed(&self) -> &[BinaryOutput] {
        &self.observed
    }

    pub fn at(&self, t: usize) -> &BinaryOutput {
        &self.observed[t]
    }

    /// Largest number of mismatching agents allowed per step,
    /// `floor(κ n)` capped at `n`.
    pub fn mismatch_budget(&self) -> usize {
        mismatch_budget(&self.kappa, self.agents())
    }

    /// `κ - ‖y - ỹ(t)‖_H`, exact.
    pub fn predicate_exact(&self, y: &BinaryOutput, t: usize) -> Result<Rational> {
        if t > self.horizon() {
            return Err(Error::OutOfRange(format!(
                "time {t} outside observation horizon 0..={}",
                self.horizon()
            )));
        }
        Ok(&self.kappa - hamming_exact(y, &self.observed[t])?)
    }

    pub fn predicate_value(&self, y: &BinaryOutput, t: usize) -> Result<f64> {
        Ok(rational::to_f64(&self.predicate_exact(y, t)?))
    }

    fn check_outputs(&self, outputs: &[BinaryOutput]) -> Result<()> {
        if outputs.len() < self.observed.len() {
            return Err(Error::Dimension {
                expected: self.observed.len(),
                found: outputs.len(),
            });
        }
        Ok(())
    }

    /// First `t ≤ T` whose predicate is violated.
    pub fn first_violation_outputs(&self, outputs: &[BinaryOutput]) -> Result<Option<usize>> {
        self.check_outputs(outputs)?;
        let budget = self.mismatch_budget();
        for (t, (y, obs)) in outputs.iter().zip(&self.observed).enumerate() {
            if y.mismatches(obs)? > budget {
                return Ok(Some(t));
            }
        }
        Ok(None)
    }

    pub fn satisfies_outputs(&self, outputs: &[BinaryOutput]) -> Result<bool> {
        Ok(self.first_violation_outputs(outputs)?.is_none())
    }

    pub fn first_violation(&self, traj: &Trajectory) -> Result<Option<usize>> {
        self.first_violation_outputs(&traj.outputs)
    }

    pub fn satisfies(&self, traj: &Trajectory) -> Result<bool> {
        self.satisfies_outputs(&traj.outputs)
    }

    /// `min_t (κ - ‖y(t) - ỹ(t)‖_H)`, exact.
    pub fn robustness_exact_outputs(&self, outputs: &[BinaryOutput]) -> Result<Rational> {
        self.check_outputs(outputs)?;
        let mut worst: Option<Rational> = None;
        for (t, y) in outputs.iter().take(self.observed.len()).enumerate() {
            let v = self.predicate_exact(y, t)?;
            worst = Some(match worst {
                Some(w) if w <= v => w,
                _ => v,
            });
        }
        Ok(worst.expect("spec has at least one step"))
    }

    pub fn robustness(&self, traj: &Trajectory) -> Result<f64> {
        Ok(rational::to_f64(&self.robustness_exact_outputs(&traj.outputs)?))
    }

    /// `Φ^κ` as a formula tree.
    pub fn formula(&self) -> Formula {
        (0..=self.horizon())
            .map(Formula::Predicate)
            .reduce(|a, b| Formula::And(Box::new(a), Box::new(b)))
            .unwrap_or(Formula::True)
    }

    /// Rows are time steps, columns agents, cells `0` or `1`. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse_csv(text: &str, kappa: Rational) -> Result<Self> {
        Self::new(parse_observation_csv(text)?, kappa)
    }

    pub fn load_csv(path: &Path, kappa: Rational) -> Result<Self> {
        let mut text = String::new();
        std::fs::File::open(path)?.read_to_string(&mut text)?;
        Self::parse_csv(&text, kappa).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for y in &self.observed {
            let cells: Vec<&str> = y.bits().iter().map(|&b| if b { "1" } else { "0" }).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ObservationFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ObservationFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

pub fn mismatch_budget(kappa: &Rational, n: usize) -> usize {
    let scaled = kappa * rational::int(n as i64);
    rational::floor_to_i64(&scaled).clamp(0, n as i64) as usize
}

fn parse_observation_csv(text: &str) -> Result<Vec<BinaryOutput>> {
    let mut rows = Vec::new();
    let mut width = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let bits = trimmed
            .split(',')
            .enumerate()
            .map(|(col, cell)| match cell.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::Parse(format!(
                    "line {line_no}, column {}: expected 0 or 1, found {other:?}",
                    col + 1
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        match width {
            None => width = Some(bits.len()),
            Some(w) if w != bits.len() => {
                return Err(Error::Parse(format!(
                    "line {line_no}: expected {w} columns, found {}",
                    bits.len()
                )))
            }
            _ => {}
        }
        rows.push(BinaryOutput::new(bits));
    }
    if rows.is_empty() {
        return Err(Error::Parse("no observation rows".into()));
    }
    Ok(rows)
}

/// JSON form: `{"kappa": "1/10", "observed": [[0, 1, …], …]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationFile {
    #[serde(with = "rational::serde_str")]
    pub kappa: Rational,
    pub observed: Vec<Vec<u8>>,
}

impl From<&ObservationSpec> for ObservationFile {
    fn from(spec: &ObservationSpec) -> Self {
        ObservationFile {
            kappa: spec.kappa.clone(),
            observed: spec
                .observed
                .iter()
                .map(|y| y.bits().iter().map(|&b| u8::from(b)).collect())
                .collect(),
        }
    }
}

impl TryFrom<ObservationFile> for ObservationSpec {
    type Error = Error;
    fn try_from(file: ObservationFile) -> Result<Self> {
        let observed = file
            .observed
            .iter()
            .map(|row| BinaryOutput::from_bits(row))
            .collect::<Result<Vec<_>>>()?;
        ObservationSpec::new(observed, file.kappa)
    }
}

/// The propositional fragment used to assemble `Φ^κ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    /// `φ^κ(t)`
    Predicate(usize),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Not(Box::new(Formula::And(
            Box::new(Formula::Not(Box::new(a))),
            Box::new(Formula::Not(Box::new(b))),
        )))
    }

    pub fn eval(&self, spec: &ObservationSpec, outputs: &[BinaryOutput]) -> Result<bool> {
        Ok(match self {
            Formula::True => true,
            Formula::Predicate(t) => {
                let y = outputs.get(*t).ok_or_else(|| {
                    Error::OutOfRange(format!("no output at time {t}"))
                })?;
                !spec.predicate_exact(y, *t)?.is_negative()
            }
            Formula::Not(f) => !f.eval(spec, outputs)?,
            Formula::And(a, b) => a.eval(spec, outputs)? && b.eval(spec, outputs)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn bits(s: &str) -> BinaryOutput {
        BinaryOutput::new(s.chars().map(|c| c == '1').collect())
    }

    fn spec(rows: &[&str], kappa: Rational) -> ObservationSpec {
        ObservationSpec::new(rows.iter().map(|r| bits(r)).collect(), kappa).unwrap()
    }

    #[test]
    fn predicate_examples() {
        let s = spec(&["0101010101"], int(0));
        assert_eq!(s.predicate_exact(&bits("0101010101"), 0).unwrap(), int(0));
        let s = spec(&["0101010101"], ratio(1, 20));
        assert_eq!(s.predicate_value(&bits("1101010101"), 0).unwrap(), -0.05);
        let s = spec(&["0101010101"], int(1));
        assert!(s.predicate_exact(&bits("1010101010"), 0).unwrap() >= int(0));
        assert!(s.predicate_exact(&bits("1010101010"), 1).is_err());
    }

    #[test]
    fn satisfaction_and_first_violation() {
        let obs = ["0000", "0001", "0011", "0111", "1111"];
        let s = spec(&obs, int(0));
        let outputs: Vec<_> = obs.iter().map(|r| bits(r)).collect();
        assert!(s.satisfies_outputs(&outputs).unwrap());
        let mut bad = outputs.clone();
        bad[3] = bits("0110");
        assert_eq!(s.first_violation_outputs(&bad).unwrap(), Some(3));
        assert!(!s.satisfies_outputs(&bad).unwrap());
        // Loosening κ never turns satisfaction into violation.
        let loose = s.with_kappa(ratio(1, 4)).unwrap();
        assert!(loose.satisfies_outputs(&bad).unwrap());
        assert!(s.satisfies_outputs(&outputs[..3]).is_err());
    }

    #[test]
    fn robustness_examples() {
        let s = spec(&["0000000000", "0000000000"], ratio(1, 5));
        let exact = vec![bits("0000000000"), bits("0000000000")];
        assert_eq!(s.robustness_exact_outputs(&exact).unwrap(), ratio(1, 5));
        let worst = vec![bits("1000000000"), bits("1110000000")];
        assert_eq!(s.robustness_exact_outputs(&worst).unwrap(), ratio(-1, 10));
        let single = spec(&["01"], ratio(1, 5));
        assert_eq!(single.robustness_exact_outputs(&[bits("01")]).unwrap(), ratio(1, 5));
    }

    #[test]
    fn budget_floor() {
        assert_eq!(mismatch_budget(&ratio(1, 10), 10), 1);
        assert_eq!(mismatch_budget(&ratio(1, 11), 10), 0);
        assert_eq!(mismatch_budget(&int(2), 10), 10);
        assert_eq!(mismatch_budget(&ratio(3, 10), 4), 1);
    }

    #[test]
    fn formula_semantics() {
        let s = spec(&["00", "11"], int(0));
        let good = vec![bits("00"), bits("11")];
        let bad = vec![bits("00"), bits("10")];
        let phi = s.formula();
        assert!(phi.eval(&s, &good).unwrap());
        assert!(!phi.eval(&s, &bad).unwrap());
        assert!(Formula::or(Formula::Predicate(1), Formula::Predicate(0)).eval(&s, &bad).unwrap());
        assert!(!Formula::Not(Box::new(Formula::Predicate(0))).eval(&s, &bad).unwrap());
        assert!(Formula::True.eval(&s, &bad).unwrap());
    }

    #[test]
    fn csv_parsing() {
        let s = ObservationSpec::parse_csv("# header\n0,1,1\n\n1, 1 ,0\n", int(0)).unwrap();
        assert_eq!(s.horizon(), 1);
        assert_eq!(s.at(1), &bits("110"));
        assert_eq!(s.to_csv(), "0,1,1\n1,1,0\n");
        let err = ObservationSpec::parse_csv("0,1\n0,2\n", int(0)).unwrap_err();
        assert!(err.to_string().contains("line 2, column 2"), "{err}");
        let err = ObservationSpec::parse_csv("0,1\n0\n", int(0)).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(ObservationSpec::parse_csv("", int(0)).is_err());
        assert!(ObservationSpec::parse_csv("0,1\n", ratio(-1, 2)).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = spec(&["0110", "1111"], ratio(1, 4));
        let text = s.to_json().unwrap();
        assert_eq!(text, r#"{"kappa":"1/4","observed":[[0,1,1,0],[1,1,1,1]]}"#);
        assert_eq!(ObservationSpec::from_json(&text).unwrap(), s);
        assert!(ObservationSpec::from_json(r#"{"kappa":"0","observed":[[2]]}"#).is_err());
    }
}
