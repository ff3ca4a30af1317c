//! Output sequences of abstract configurations under exact semantics.
//!
//! Simulation runs in doubles; if any opinion lands within [`EXACT_MARGIN`] of
//! the threshold the configuration is re-simulated with rationals, so the
//! returned outputs always match exact arithmetic.

use crate::abstraction::AbstractConfig;
use crate::dynamics::{quantize, simulate_exact, BinaryOutput};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::rational::{self, Rational};

use super::problem::VerificationProblem;

/// Double-precision opinions closer than this to `γ` are re-checked exactly.
pub const EXACT_MARGIN: f64 = 1e-9;

pub struct Evaluator<'a> {
    problem: &'a VerificationProblem,
    w: &'a Matrix,
    init_values: Vec<f64>,
    level_values: Vec<f64>,
    gamma: f64,
}

impl<'a> Evaluator<'a> {
    pub fn new(problem: &'a VerificationProblem) -> Self {
        let grid = &problem.grid;
        Evaluator {
            problem,
            w: grid.w_ab.as_matrix(),
            init_values: grid.init_values().iter().map(rational::to_f64).collect(),
            level_values: grid.levels().iter().map(rational::to_f64).collect(),
            gamma: problem.gamma_f64(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.problem.horizon()
    }

    /// Outputs for `t = 0..=T` with exact threshold semantics.
    pub fn outputs(&self, config: &AbstractConfig) -> Vec<BinaryOutput> {
        match self.float_outputs(config) {
            Some(out) => out,
            None => self.exact_outputs(config).expect("validated dimensions"),
        }
    }

    /// `None` when some opinion is too close to the threshold to trust.
    fn float_outputs(&self, config: &AbstractConfig) -> Option<Vec<BinaryOutput>> {
        let x0: Vec<f64> = config.init_indices.iter().map(|&k| self.init_values[k]).collect();
        let lambda: Vec<f64> = config.lambda_levels.iter().map(|&k| self.level_values[k]).collect();
        let mut outputs = Vec::with_capacity(self.horizon() + 1);
        let mut x = x0.clone();
        for t in 0..=self.horizon() {
            if t > 0 {
                let mixed = self.w.mul_vec(&x);
                for i in 0..x.len() {
                    x[i] = (1.0 - lambda[i]) * mixed[i] + lambda[i] * x0[i];
                }
            }
            if x.iter().any(|&v| (v - self.gamma).abs() <= EXACT_MARGIN) {
                return None;
            }
            outputs.push(quantize(&x, self.gamma));
        }
        Some(outputs)
    }

    pub fn exact_outputs(&self, config: &AbstractConfig) -> Result<Vec<BinaryOutput>> {
        let grid = &self.problem.grid;
        let traj = simulate_exact(
            &config.init_exact(grid),
            &config.lambda_exact(grid),
            &grid.w_ab,
            self.horizon(),
            &self.problem.gamma,
        )?;
        Ok(traj.outputs)
    }

    pub fn exact_opinions(&self, config: &AbstractConfig) -> Result<Vec<Vec<Rational>>> {
        let grid = &self.problem.grid;
        Ok(simulate_exact(
            &config.init_exact(grid),
            &config.lambda_exact(grid),
            &grid.w_ab,
            self.horizon(),
            &self.problem.gamma,
        )?
        .opinions)
    }
}
