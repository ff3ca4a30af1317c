//! Friedkin-Johnsen dynamics in augmented form with thresholded binary outputs.
//!
//! The augmented state stacks the current opinions on top of the anchored
//! initial opinions, which turns the update
//! `x(t+1) = (I - Λ) W x(t) + Λ x(0)` into a time-invariant linear map.

use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{spectral_norm, Matrix};
use crate::rational::{self, Rational};

pub const DEFAULT_GAMMA: f64 = 0.5;
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Slack used when checking that simulated opinions stay inside `[0, 1]`.
const CONFINEMENT_SLACK: f64 = 1e-12;

fn check_unit_interval(what: &str, values: &[f64]) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("{what}[{i}] = {v}")));
        }
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfRange(format!("{what}[{i}] = {v} not in [0, 1]")));
        }
    }
    Ok(())
}

pub fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("threshold gamma = {gamma} not in (0, 1)")))
    }
}

/// Per-agent stubbornness `λ_i ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StubbornnessVector(Vec<f64>);

impl StubbornnessVector {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        check_unit_interval("lambda", &lambda)?;
        Ok(StubbornnessVector(lambda))
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_exact(&self) -> Vec<Rational> {
        self.0
            .iter()
            .map(|&v| rational::from_f64_exact(v).expect("validated finite"))
            .collect()
    }
}

impl TryFrom<Vec<f64>> for StubbornnessVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<StubbornnessVector> for Vec<f64> {
    fn from(v: StubbornnessVector) -> Self {
        v.0
    }
}

/// Row-stochastic influence matrix, held both exactly and as doubles.
///
/// The exact entries feed the SMT encoder and the exact re-simulator; the
/// doubles drive ordinary simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix {
    exact: Vec<Vec<Rational>>,
    float: Matrix,
}

impl InfluenceMatrix {
    pub fn from_rationals(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            check_len(n, row.len())?;
            if let Some(j) = row.iter().position(|v| *v < Rational::zero()) {
                return Err(Error::NotStochastic(format!("negative entry at ({i}, {j})")));
            }
            let sum: Rational = row.iter().sum();
            let dev = rational::to_f64(&(&sum - Rational::one())).abs();
            if dev > ROW_SUM_TOLERANCE {
                return Err(Error::NotStochastic(format!(
                    "row {i} sums to {}",
                    rational::to_f64(&sum)
                )));
            }
        }
        let float = Matrix::from_fn(n, n, |i, j| rational::to_f64(&rows[i][j]));
        Ok(InfluenceMatrix { exact: rows, float })
    }

    /// Takes the exact binary value of every double.
    pub fn from_f64_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let exact = rows
            .iter()
            .map(|row| row.iter().map(|&v| rational::from_f64_exact(v)).collect())
            .collect::<Result<Vec<Vec<_>>>>()?;
        let m = Self::from_rationals(exact)?;
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { Rational::one() } else { Rational::zero() })
                    .collect()
            })
            .collect();
        Self::from_rationals(rows).expect("identity is stochastic")
    }

    /// Every entry `1/n`.
    pub fn uniform(n: usize) -> Self {
        let rows = vec![vec![rational::ratio(1, n as i64); n]; n];
        Self::from_rationals(rows).expect("uniform is stochastic")
    }

    pub fn dim(&self) -> usize {
        self.exact.len()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.float
    }

    pub fn exact_rows(&self) -> &[Vec<Rational>] {
        &self.exact
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.float.get(i, j)
    }

    pub fn exact(&self, i: usize, j: usize) -> &Rational {
        &self.exact[i][j]
    }

    pub fn norm(&self) -> Result<f64> {
        spectral_norm(&self.float)
    }
}

impl Serialize for InfluenceMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = self
            .exact
            .iter()
            .map(|r| r.iter().map(rational::format_rational).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for InfluenceMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<String>>::deserialize(d)?;
        let exact = rows
            .iter()
            .map(|r| r.iter().map(|t| rational::parse_rational(t)).collect())
            .collect::<Result<Vec<Vec<_>>>>()
            .map_err(serde::de::Error::custom)?;
        InfluenceMatrix::from_rationals(exact).map_err(serde::de::Error::custom)
    }
}

/// A concrete system: initial opinions plus parameters `θ = (λ, W)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub x_init: Vec<f64>,
    pub lambda: StubbornnessVector,
    pub w: InfluenceMatrix,
}

impl ModelConfig {
    pub fn new(x_init: Vec<f64>, lambda: StubbornnessVector, w: InfluenceMatrix) -> Result<Self> {
        check_unit_interval("x_init", &x_init)?;
        check_model(x_init.len(), &lambda, &w)?;
        Ok(ModelConfig { x_init, lambda, w })
    }

    pub fn dim(&self) -> usize {
        self.x_init.len()
    }

    pub fn simulate(&self, horizon: usize, gamma: f64) -> Result<Trajectory> {
        simulate(&self.x_init, &self.lambda, &self.w, horizon, gamma)
    }

    pub fn contraction_factor(&self) -> Result<f64> {
        contraction_factor(&self.lambda, &self.w)
    }
}

/// `x̌ = [x(t); x(0)]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedState {
    pub current: Vec<f64>,
    pub anchor: Vec<f64>,
}

impl AugmentedState {
    /// `dup(x)`
    pub fn duplicate(x: &[f64]) -> Self {
        AugmentedState {
            current: x.to_vec(),
            anchor: x.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.current.len()
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut v = self.current.clone();
        v.extend_from_slice(&self.anchor);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BinaryOutput(Vec<bool>);

impl BinaryOutput {
    pub fn new(bits: Vec<bool>) -> Self {
        BinaryOutput(bits)
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::OutOfRange(format!("output bit {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BinaryOutput)
    }

    pub fn zeros(n: usize) -> Self {
        BinaryOutput(vec![false; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn mismatches(&self, other: &BinaryOutput) -> Result<usize> {
        check_len(self.len(), other.len())?;
        Ok(self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count())
    }
}

impl fmt::Display for BinaryOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// The unique path of a singleton-initialized system, with outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<AugmentedState>,
    pub outputs: Vec<BinaryOutput>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn opinions(&self, t: usize) -> &[f64] {
        &self.states[t].current
    }
}

/// `y_i = 1` iff `x_i ≥ γ`.
pub fn quantize(x: &[f64], gamma: f64) -> BinaryOutput {
    BinaryOutput(x.iter().map(|&xi| xi >= gamma).collect())
}

pub fn quantize_exact(x: &[Rational], gamma: &Rational) -> BinaryOutput {
    BinaryOutput(x.iter().map(|xi| xi >= gamma).collect())
}

/// Normalized Hamming distance `(1/n) Σ |a_i - b_i|`.
pub fn hamming(a: &BinaryOutput, b: &BinaryOutput) -> Result<f64> {
    let n = a.len();
    let m = a.mismatches(b)?;
    Ok(if n == 0 { 0.0 } else { m as f64 / n as f64 })
}

pub fn hamming_exact(a: &BinaryOutput, b: &BinaryOutput) -> Result<Rational> {
    let n = a.len();
    let m = a.mismatches(b)?;
    Ok(if n == 0 {
        Rational::zero()
    } else {
        rational::ratio(m as i64, n as i64)
    })
}

fn check_model(n: usize, lambda: &StubbornnessVector, w: &InfluenceMatrix) -> Result<()> {
    check_len(n, lambda.len())?;
    check_len(n, w.dim())
}

/// One step of the augmented dynamics.
pub fn fj_step(
    state: &AugmentedState,
    lambda: &StubbornnessVector,
    w: &InfluenceMatrix,
) -> Result<AugmentedState> {
    let n = state.dim();
    check_len(n, state.anchor.len())?;
    check_model(n, lambda, w)?;
    Ok(step_unchecked(state, lambda.as_slice(), w.as_matrix()))
}

fn step_unchecked(state: &AugmentedState, lambda: &[f64], w: &Matrix) -> AugmentedState {
    let mixed = w.mul_vec(&state.current);
    let current = mixed
        .iter()
        .zip(lambda)
        .zip(&state.anchor)
        .map(|((m, l), z)| (1.0 - l) * m + l * z)
        .collect();
    AugmentedState {
        current,
        anchor: state.anchor.clone(),
    }
}

pub fn simulate(
    x_init: &[f64],
    lambda: &StubbornnessVector,
    w: &InfluenceMatrix,
    horizon: usize,
    gamma: f64,
) -> Result<Trajectory> {
    check_gamma(gamma)?;
    check_unit_interval("x_init", x_init)?;
    check_model(x_init.len(), lambda, w)?;
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(AugmentedState::duplicate(x_init));
    for t in 0..horizon {
        let next = step_unchecked(&states[t], lambda.as_slice(), w.as_matrix());
        debug_assert!(next
            .current
            .iter()
            .all(|&x| (-CONFINEMENT_SLACK..=1.0 + CONFINEMENT_SLACK).contains(&x)));
        states.push(next);
    }
    let outputs = states.iter().map(|s| quantize(&s.current, gamma)).collect();
    Ok(Trajectory { states, outputs })
}

/// The `2n × 2n` transition matrix `[[(I-Λ)W, Λ], [0, I]]`.
pub fn augmented_transition(lambda: &StubbornnessVector, w: &InfluenceMatrix) -> Result<Matrix> {
    let n = w.dim();
    check_len(n, lambda.len())?;
    let l = lambda.as_slice();
    Ok(Matrix::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, true) => (1.0 - l[i]) * w.get(i, j),
        (true, false) => {
            if j - n == i {
                l[i]
            } else {
                0.0
            }
        }
        (false, true) => 0.0,
        (false, false) => {
            if i == j {
                1.0
            } else {
                0.0
            }
        }
    }))
}

/// Spectral norm `‖(I - Λ) W‖`.
pub fn contraction_factor(lambda: &StubbornnessVector, w: &InfluenceMatrix) -> Result<f64> {
    check_model(w.dim(), lambda, w)?;
    let free: Vec<f64> = lambda.as_slice().iter().map(|l| 1.0 - l).collect();
    spectral_norm(&w.as_matrix().scale_rows(&free)?)
}

/// Opinions and outputs computed in exact arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactTrajectory {
    pub opinions: Vec<Vec<Rational>>,
    pub outputs: Vec<BinaryOutput>,
}

pub fn simulate_exact(
    x_init: &[Rational],
    lambda: &[Rational],
    w: &InfluenceMatrix,
    horizon: usize,
    gamma: &Rational,
) -> Result<ExactTrajectory> {
    let n = x_init.len();
    check_len(n, lambda.len())?;
    check_len(n, w.dim())?;
    let rows = w.exact_rows();
    let mut opinions = Vec::with_capacity(horizon + 1);
    opinions.push(x_init.to_vec());
    for t in 0..horizon {
        let x = &opinions[t];
        let next: Vec<Rational> = (0..n)
            .map(|i| {
                let li = &lambda[i];
                if li.is_one() {
                    return x_init[i].clone();
                }
                let mut mixed = Rational::zero();
                for (wij, xj) in rows[i].iter().zip(x) {
                    if !wij.is_zero() {
                        mixed += wij * xj;
                    }
                }
                (Rational::one() - li) * mixed + li * &x_init[i]
            })
            .collect();
        opinions.push(next);
    }
    let outputs = opinions.iter().map(|x| quantize_exact(x, gamma)).collect();
    Ok(ExactTrajectory { opinions, outputs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_half() -> InfluenceMatrix {
        InfluenceMatrix::uniform(2)
    }

    #[test]
    fn full_stubbornness_freezes_state() {
        let w = half_half();
        let lambda = StubbornnessVector::constant(2, 1.0).unwrap();
        let s = AugmentedState::duplicate(&[0.1, 0.8]);
        assert_eq!(fj_step(&s, &lambda, &w).unwrap(), s);
    }

    #[test]
    fn identity_weights_without_stubbornness_freeze_state() {
        let w = InfluenceMatrix::identity(3);
        let lambda = StubbornnessVector::constant(3, 0.0).unwrap();
        let s = AugmentedState {
            current: vec![0.2, 0.3, 0.9],
            anchor: vec![0.5, 0.5, 0.5],
        };
        assert_eq!(fj_step(&s, &lambda, &w).unwrap(), s);
    }

    #[test]
    fn averaging_two_agents() {
        let lambda = StubbornnessVector::constant(2, 0.0).unwrap();
        let s = AugmentedState::duplicate(&[0.0, 1.0]);
        let next = fj_step(&s, &lambda, &half_half()).unwrap();
        assert_eq!(next.current, vec![0.5, 0.5]);
        assert_eq!(next.anchor, vec![0.0, 1.0]);

        let traj = simulate(&[0.0, 1.0], &lambda, &half_half(), 1, 0.5).unwrap();
        assert_eq!(traj.states[1].current, vec![0.5, 0.5]);
        assert_eq!(traj.outputs[1], BinaryOutput::from_bits(&[1, 1]).unwrap());
        assert_eq!(traj.outputs[0], BinaryOutput::from_bits(&[0, 1]).unwrap());
    }

    #[test]
    fn step_dimension_mismatch() {
        let lambda = StubbornnessVector::constant(3, 0.0).unwrap();
        let s = AugmentedState::duplicate(&[0.0, 1.0]);
        assert!(matches!(
            fj_step(&s, &lambda, &half_half()),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn simulate_rejects_bad_gamma_and_inputs() {
        let lambda = StubbornnessVector::constant(2, 0.0).unwrap();
        assert!(simulate(&[0.0, 1.0], &lambda, &half_half(), 3, 1.0).is_err());
        assert!(simulate(&[0.0, 1.0], &lambda, &half_half(), 3, 0.0).is_err());
        assert!(simulate(&[0.0, 1.5], &lambda, &half_half(), 3, 0.5).is_err());
        assert!(StubbornnessVector::new(vec![-0.1]).is_err());
    }

    #[test]
    fn quantize_boundary_and_examples() {
        assert_eq!(quantize(&[0.5, 0.49999], 0.5).bits(), &[true, false]);
        assert_eq!(quantize(&[0.0, 0.0, 0.0], 0.5).bits(), &[false, false, false]);
        assert_eq!(quantize(&[0.25, 0.75], 0.5).bits(), &[false, true]);
    }

    #[test]
    fn hamming_examples() {
        let a = BinaryOutput::from_bits(&[1, 0, 1, 0]).unwrap();
        let ones = BinaryOutput::from_bits(&[1, 1, 1, 1]).unwrap();
        let zeros = BinaryOutput::zeros(4);
        assert_eq!(hamming(&a, &a).unwrap(), 0.0);
        assert_eq!(hamming(&zeros, &ones).unwrap(), 1.0);
        assert_eq!(hamming(&a, &ones).unwrap(), 0.5);
        assert_eq!(hamming_exact(&a, &ones).unwrap(), rational::ratio(1, 2));
        assert!(hamming(&a, &BinaryOutput::zeros(3)).is_err());
        assert!(BinaryOutput::from_bits(&[2]).is_err());
    }

    #[test]
    fn contraction_factor_examples() {
        let w = half_half();
        let ones = StubbornnessVector::constant(2, 1.0).unwrap();
        assert_eq!(contraction_factor(&ones, &w).unwrap(), 0.0);
        let zeros = StubbornnessVector::constant(2, 0.0).unwrap();
        assert!((contraction_factor(&zeros, &w).unwrap() - 1.0).abs() < 1e-10);
        let halves = StubbornnessVector::constant(2, 0.5).unwrap();
        assert!((contraction_factor(&halves, &w).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn influence_matrix_validation() {
        assert!(InfluenceMatrix::from_f64_rows(&[vec![0.5, 0.4], vec![0.0, 1.0]]).is_err());
        assert!(InfluenceMatrix::from_f64_rows(&[vec![1.5, -0.5], vec![0.0, 1.0]]).is_err());
        assert!(InfluenceMatrix::from_f64_rows(&[vec![1.0, 0.0]]).is_err());
        let w = InfluenceMatrix::from_f64_rows(&[vec![0.25, 0.75], vec![1.0, 0.0]]).unwrap();
        assert_eq!(w.exact(0, 1), &rational::ratio(3, 4));
    }

    #[test]
    fn influence_matrix_json_round_trip() {
        let w = InfluenceMatrix::from_rationals(vec![
            vec![rational::ratio(5, 8), rational::ratio(3, 8)],
            vec![rational::ratio(3, 8), rational::ratio(5, 8)],
        ])
        .unwrap();
        let text = serde_json::to_string(&w).unwrap();
        assert_eq!(text, r#"[["5/8","3/8"],["3/8","5/8"]]"#);
        let back: InfluenceMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn exact_matches_float_on_dyadic_example() {
        let w = half_half();
        let lambda = StubbornnessVector::new(vec![0.5, 0.25]).unwrap();
        let x = [0.25, 0.75];
        let float = simulate(&x, &lambda, &w, 4, 0.5).unwrap();
        let exact_x: Vec<_> = x.iter().map(|&v| rational::from_f64_exact(v).unwrap()).collect();
        let exact =
            simulate_exact(&exact_x, &lambda.to_exact(), &w, 4, &rational::ratio(1, 2)).unwrap();
        assert_eq!(exact.outputs, float.outputs);
        for t in 0..=4 {
            for i in 0..2 {
                assert_eq!(rational::to_f64(&exact.opinions[t][i]), float.states[t].current[i]);
            }
        }
    }
}
